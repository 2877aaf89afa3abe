//! Shared helpers for the oracle tests: quadrature, a tiny dense solver,
//! and deterministic instance generation.

#![allow(dead_code)]

use penselect::rng::RngStream;

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, whole, m, fm, tol, 60)
}

/// Solve the k x k system `A x = b` by Gaussian elimination with partial
/// pivoting (test oracle for the orthogonal-factorization path).
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..k {
            let factor = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut s = b[row];
        for c in row + 1..k {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Least squares of `y` on the given columns via normal equations; returns
/// the residual sum of squares. Independent of the library's projection
/// path (Gram matrix + dense solve instead of orthogonalization).
pub fn normal_equations_rss(cols: &[Vec<f64>], y: &[f64]) -> f64 {
    let k = cols.len();
    if k == 0 {
        return y.iter().map(|v| v * v).sum();
    }
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
        }
        rhs[i] = cols[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let beta = solve_dense(&mut gram, &mut rhs);
    y.iter()
        .enumerate()
        .map(|(row, &yv)| {
            let fitted: f64 = (0..k).map(|j| beta[j] * cols[j][row]).sum();
            (yv - fitted) * (yv - fitted)
        })
        .map(|r| r)
        .sum()
}

/// Standard normal draws for test instances.
pub fn normals(seed: u64, stream: u64, count: usize) -> Vec<f64> {
    penselect::rng::sample_gaussian(&RngStream::new(seed, stream), count)
}
