//! Least-squares projections onto the model families, residual sums of
//! squares, variance estimates, and the selection criteria.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::collection::ModelKey;
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Below this the residual sum of squares is treated as an exact fit; the
/// log criteria are undefined there and report saturation instead.
pub const RSS_FLOOR: f64 = 1e-300;

/// Relative threshold for rank detection in orthogonal factorizations.
const RANK_TOL: f64 = 1e-10;

/// Which penalized criterion to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `rss * (1 + pen / N_m)` — penalty on the residual scale.
    ResidualScale,
    /// `(n/2) ln(rss / n) + pen' / 2` — log-likelihood scale.
    LogScale,
    /// `(n/2) ln(rss / N_m) + pen* / 2` — log scale with the unbiased
    /// variance normalization, used by the Kullback-mode rule.
    KullbackLog,
}

/// A design matrix stored by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    cols: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn from_columns(cols: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = cols.first().map(Vec::len).unwrap_or(0);
        if cols.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Domain("design columns have unequal lengths".into()));
        }
        Ok(Self { n_rows, cols })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> Result<&[f64]> {
        self.cols.get(j).map(Vec::as_slice).ok_or_else(|| {
            Error::Domain(format!(
                "design has {} columns, column {j} requested",
                self.cols.len()
            ))
        })
    }
}

/// Design points in `[0, 1]^d` for the partition family, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoints {
    n: usize,
    d: usize,
    coords: Vec<f64>,
}

impl DesignPoints {
    pub fn new(n: usize, d: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: coords.len(),
            });
        }
        Ok(Self { n, d, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }
}

/// Optional design data needed by the column and partition families.
#[derive(Debug, Clone, Copy, Default)]
pub struct Design<'a> {
    pub matrix: Option<&'a DesignMatrix>,
    pub points: Option<&'a DesignPoints>,
}

impl<'a> Design<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_matrix(matrix: &'a DesignMatrix) -> Self {
        Self {
            matrix: Some(matrix),
            points: None,
        }
    }

    pub fn with_points(points: &'a DesignPoints) -> Self {
        Self {
            matrix: None,
            points: Some(points),
        }
    }
}

/// One fitted model: projection of the data, residual sum of squares,
/// variance estimate, and the realized rank of the span.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub model: ModelKey,
    pub mu_hat: Vec<f64>,
    pub rss: f64,
    /// `rss / (n - effective_rank)`; infinite when the model saturates the
    /// sample.
    pub sigma2_hat: f64,
    pub effective_rank: usize,
}

impl FitRecord {
    fn new(model: ModelKey, mu_hat: Vec<f64>, rss: f64, effective_rank: usize) -> Self {
        let n = mu_hat.len();
        let nm = n - effective_rank;
        let sigma2_hat = if nm == 0 { f64::INFINITY } else { rss / nm as f64 };
        Self {
            model,
            mu_hat,
            rss,
            sigma2_hat,
            effective_rank,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Orthonormalize `col` against `basis` (two Gram-Schmidt passes) and
/// append it if its residual survives the rank threshold. Returns `true`
/// if the rank grew.
pub(crate) fn push_orthonormal(basis: &mut Vec<Vec<f64>>, col: &[f64]) -> bool {
    let scale = norm_sq(col).sqrt();
    if scale == 0.0 {
        return false;
    }
    let mut v = col.to_vec();
    for _ in 0..2 {
        for q in basis.iter() {
            let c = dot(q, &v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
    }
    let norm = norm_sq(&v).sqrt();
    if norm <= RANK_TOL * scale {
        return false;
    }
    for vi in v.iter_mut() {
        *vi /= norm;
    }
    basis.push(v);
    true
}

/// Projection of `y` onto the span of an orthonormal basis.
pub(crate) fn project_onto_basis(y: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut mu = vec![0.0; y.len()];
    for q in basis {
        let c = dot(q, y);
        for (mi, qi) in mu.iter_mut().zip(q) {
            *mi += c * qi;
        }
    }
    mu
}

fn residual_rss(y: &[f64], mu: &[f64]) -> f64 {
    y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Orthogonal projection of `y` onto the model's span.
pub fn project(y: &[f64], model: &ModelKey, design: &Design) -> Result<FitRecord> {
    let n = y.len();
    match model {
        ModelKey::CoordSubset(idx) => {
            ModelKey::check_sorted_unique(idx)?;
            if idx.iter().any(|&i| i >= n) {
                return Err(Error::Domain(format!(
                    "coordinate index out of range for n = {n}"
                )));
            }
            let mut mu = vec![0.0; n];
            for &i in idx {
                mu[i] = y[i];
            }
            let rss = residual_rss(y, &mu);
            Ok(FitRecord::new(model.clone(), mu, rss, idx.len()))
        }
        ModelKey::ColumnSubset(idx) => {
            ModelKey::check_sorted_unique(idx)?;
            let matrix = design.matrix.ok_or_else(|| {
                Error::Domain("column-subset models need a design matrix".into())
            })?;
            if matrix.n_rows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: matrix.n_rows(),
                });
            }
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(idx.len());
            for &j in idx {
                push_orthonormal(&mut basis, matrix.column(j)?);
            }
            let mu = project_onto_basis(y, &basis);
            let rss = residual_rss(y, &mu);
            let rank = basis.len();
            Ok(FitRecord::new(model.clone(), mu, rss, rank))
        }
        ModelKey::ChangePoints(points) => {
            ModelKey::check_sorted_unique(points)?;
            if points.iter().any(|&t| t == 0 || t >= n) {
                return Err(Error::Domain(format!(
                    "change points must lie in 1..n, got {points:?} with n = {n}"
                )));
            }
            let mut mu = vec![0.0; n];
            let mut starts = Vec::with_capacity(points.len() + 2);
            starts.push(0);
            starts.extend_from_slice(points);
            starts.push(n);
            for w in starts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mean = y[a..b].iter().sum::<f64>() / (b - a) as f64;
                for m in mu[a..b].iter_mut() {
                    *m = mean;
                }
            }
            let rss = residual_rss(y, &mu);
            Ok(FitRecord::new(model.clone(), mu, rss, points.len() + 1))
        }
        ModelKey::Partition { degree, cells } => {
            let points = design.points.ok_or_else(|| {
                Error::Domain("partition models need design points".into())
            })?;
            if points.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: points.n(),
                });
            }
            if points.d() != cells.len() {
                return Err(Error::DimensionMismatch {
                    expected: cells.len(),
                    got: points.d(),
                });
            }
            project_partition(y, model, *degree, cells, points)
        }
    }
}

/// Piecewise polynomial fit: per-cell least squares on a scaled monomial
/// basis (per-variable degree up to `degree`). Empty cells contribute
/// nothing to the rank or the fit.
fn project_partition(
    y: &[f64],
    model: &ModelKey,
    degree: usize,
    cells: &[usize],
    points: &DesignPoints,
) -> Result<FitRecord> {
    let n = y.len();
    let d = cells.len();
    let n_cells: usize = cells.iter().product();

    // assign observations to cells
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    for i in 0..n {
        let pt = points.point(i);
        let mut cell = 0usize;
        for (axis, (&t, &k)) in pt.iter().zip(cells).enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Domain(format!(
                    "design point {t} on axis {axis} lies outside [0, 1]"
                )));
            }
            let j = ((t * k as f64).floor() as usize).min(k - 1);
            cell = cell * k + j;
        }
        members[cell].push(i);
    }

    // tensor monomial exponents, per-variable degree <= degree
    let n_basis = (degree + 1).pow(d as u32);
    let mut mu = vec![0.0; n];
    let mut rank = 0usize;
    for (cell, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        // cell center and half-width per axis, for a conditioned basis
        let mut centers = vec![0.0; d];
        let mut halfs = vec![0.0; d];
        let mut c = cell;
        for axis in (0..d).rev() {
            let k = cells[axis];
            let j = c % k;
            c /= k;
            let lo = j as f64 / k as f64;
            let hi = (j + 1) as f64 / k as f64;
            centers[axis] = 0.5 * (lo + hi);
            halfs[axis] = 0.5 * (hi - lo);
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for b in 0..n_basis {
            let mut exps = vec![0usize; d];
            let mut bb = b;
            for e in exps.iter_mut().rev() {
                *e = bb % (degree + 1);
                bb /= degree + 1;
            }
            let col: Vec<f64> = idx
                .iter()
                .map(|&i| {
                    let pt = points.point(i);
                    exps.iter()
                        .enumerate()
                        .map(|(axis, &e)| {
                            let u = (pt[axis] - centers[axis]) / halfs[axis];
                            u.powi(e as i32)
                        })
                        .product()
                })
                .collect();
            push_orthonormal(&mut basis, &col);
        }
        let local_y: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let local_mu = project_onto_basis(&local_y, &basis);
        for (&i, &m) in idx.iter().zip(&local_mu) {
            mu[i] = m;
        }
        rank += basis.len();
    }
    let rss = residual_rss(y, &mu);
    Ok(FitRecord::new(model.clone(), mu, rss, rank))
}

/// Residual-scale criterion `rss * (1 + pen / N_m)`.
pub fn crit_residual_scale(fit: &FitRecord, pen: f64, n: usize) -> Result<f64> {
    if fit.effective_rank >= n {
        return Err(Error::Domain(format!(
            "criterion requires N_m >= 1, model rank {} saturates n = {n}",
            fit.effective_rank
        )));
    }
    let nm = (n - fit.effective_rank) as f64;
    Ok(fit.rss * (1.0 + pen / nm))
}

/// Log-scale criterion `(n/2) ln(rss / n) + pen' / 2`.
///
/// Reports [`Error::SaturatedFit`] when the residual is below [`RSS_FLOOR`];
/// such a model wins only if every model saturates.
pub fn crit_log_scale(fit: &FitRecord, pen_prime: f64, n: usize) -> Result<f64> {
    if fit.rss < RSS_FLOOR {
        return Err(Error::SaturatedFit);
    }
    Ok(n as f64 / 2.0 * (fit.rss / n as f64).ln() + pen_prime / 2.0)
}

/// Kullback-mode criterion `(n/2) ln(rss / N_m) + pen* / 2`.
pub fn crit_kullback_log(fit: &FitRecord, pen_star: f64) -> Result<f64> {
    let n = fit.mu_hat.len();
    if fit.effective_rank >= n {
        return Err(Error::Domain(format!(
            "criterion requires N_m >= 1, model rank {} saturates n = {n}",
            fit.effective_rank
        )));
    }
    if fit.rss < RSS_FLOOR {
        return Err(Error::SaturatedFit);
    }
    let nm = (n - fit.effective_rank) as f64;
    Ok(n as f64 / 2.0 * (fit.rss / nm).ln() + pen_star / 2.0)
}

/// Criterion value from the raw ingredients, given a penalty on the
/// residual (`Crit_L`) scale. For the log scale the penalty is converted
/// through the exact bijection; for the Kullback criterion the penalty is
/// used as is (it is already a `pen*`).
pub(crate) fn criterion_from_parts(
    criterion: Criterion,
    rss: f64,
    eff_rank: usize,
    pen: f64,
    n: usize,
) -> Result<f64> {
    if eff_rank >= n {
        return Err(Error::Domain(format!(
            "criterion requires N_m >= 1, model rank {eff_rank} saturates n = {n}"
        )));
    }
    let nm = (n - eff_rank) as f64;
    match criterion {
        Criterion::ResidualScale => Ok(rss * (1.0 + pen / nm)),
        Criterion::LogScale => {
            if rss < RSS_FLOOR {
                return Err(Error::SaturatedFit);
            }
            let pen_prime = crate::penalty::pen_convert(
                pen,
                eff_rank,
                n,
                crate::penalty::ConvertDirection::PenToPrime,
            )?;
            Ok(n as f64 / 2.0 * (rss / n as f64).ln() + pen_prime / 2.0)
        }
        Criterion::KullbackLog => {
            if rss < RSS_FLOOR {
                return Err(Error::SaturatedFit);
            }
            Ok(n as f64 / 2.0 * (rss / nm).ln() + pen / 2.0)
        }
    }
}

/// Evaluate the chosen criterion for a fitted model; see
/// [`criterion_from_parts`] for the penalty-scale conventions.
pub fn evaluate_criterion(
    criterion: Criterion,
    fit: &FitRecord,
    pen: f64,
    n: usize,
) -> Result<f64> {
    criterion_from_parts(criterion, fit.rss, fit.effective_rank, pen, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coord_projection() {
        let y = [3.0, -1.0, 2.0];
        let fit = project(&y, &ModelKey::CoordSubset(vec![0, 2]), &Design::none()).unwrap();
        assert_eq!(fit.mu_hat, vec![3.0, 0.0, 2.0]);
        assert_eq!(fit.rss, 1.0);
        assert_eq!(fit.effective_rank, 2);
        assert_eq!(fit.sigma2_hat, 1.0);
    }

    #[test]
    fn constant_fit_at_grand_mean() {
        let y = [1.0, 2.0, 3.0, 6.0];
        let fit = project(&y, &ModelKey::ChangePoints(vec![]), &Design::none()).unwrap();
        let mean = 3.0;
        assert!(fit.mu_hat.iter().all(|&m| (m - mean).abs() < 1e-12));
        let expect: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((fit.rss - expect).abs() < 1e-12);
        assert_eq!(fit.effective_rank, 1);
    }

    #[test]
    fn segment_means() {
        let y = [0.0, 0.0, 5.0, 5.0, 5.0];
        let fit = project(&y, &ModelKey::ChangePoints(vec![2]), &Design::none()).unwrap();
        assert!(fit.rss.abs() < 1e-20);
        assert_eq!(fit.effective_rank, 2);
        assert!(project(&y, &ModelKey::ChangePoints(vec![0]), &Design::none()).is_err());
        assert!(project(&y, &ModelKey::ChangePoints(vec![5]), &Design::none()).is_err());
    }

    #[test]
    fn column_projection_matches_normal_equations() {
        // 2-column well-conditioned design, solved by hand via normal equations
        let x = DesignMatrix::from_columns(vec![
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 2.0, 3.0, 4.0],
        ])
        .unwrap();
        let y = [2.0, 2.9, 4.2, 4.9];
        let fit = project(
            &y,
            &ModelKey::ColumnSubset(vec![0, 1]),
            &Design::with_matrix(&x),
        )
        .unwrap();
        // normal equations: [4, 10; 10, 30] beta = [14.0, 40.0]
        let det = 4.0 * 30.0 - 100.0;
        let b0 = (30.0 * 14.0 - 10.0 * 40.0) / det;
        let b1 = (4.0 * 40.0 - 10.0 * 14.0) / det;
        let rss: f64 = (0..4)
            .map(|i| {
                let m = b0 + b1 * (i as f64 + 1.0);
                (y[i] - m) * (y[i] - m)
            })
            .sum();
        assert!((fit.rss - rss).abs() < 1e-10, "{} vs {rss}", fit.rss);
        assert_eq!(fit.effective_rank, 2);
    }

    #[test]
    fn duplicate_column_rank() {
        let x = DesignMatrix::from_columns(vec![
            vec![1.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let y = [1.0, 2.0, 3.0];
        let fit = project(
            &y,
            &ModelKey::ColumnSubset(vec![0, 1, 2]),
            &Design::with_matrix(&x),
        )
        .unwrap();
        assert_eq!(fit.effective_rank, 2);
    }

    #[test]
    fn partition_fit_flat_signal() {
        let n = 12;
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let pts = DesignPoints::new(n, 1, coords).unwrap();
        let y = vec![2.5; n];
        let fit = project(
            &y,
            &ModelKey::Partition {
                degree: 0,
                cells: vec![1],
            },
            &Design::with_points(&pts),
        )
        .unwrap();
        assert!(fit.rss < 1e-20);
        assert_eq!(fit.effective_rank, 1);
    }

    #[test]
    fn partition_quadratic_recovery() {
        // degree-2 fit on one cell reproduces a quadratic exactly
        let n = 20;
        let coords: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let y: Vec<f64> = coords.iter().map(|&t| 1.0 + 2.0 * t - 3.0 * t * t).collect();
        let pts = DesignPoints::new(n, 1, coords).unwrap();
        let fit = project(
            &y,
            &ModelKey::Partition {
                degree: 2,
                cells: vec![1],
            },
            &Design::with_points(&pts),
        )
        .unwrap();
        assert!(fit.rss < 1e-18, "rss = {}", fit.rss);
        assert_eq!(fit.effective_rank, 3);
    }

    #[test]
    fn partition_empty_cells_reduce_rank() {
        // all points in the left half: right cells stay empty
        let n = 8;
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / (2 * n) as f64).collect();
        let pts = DesignPoints::new(n, 1, coords).unwrap();
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let fit = project(
            &y,
            &ModelKey::Partition {
                degree: 0,
                cells: vec![4],
            },
            &Design::with_points(&pts),
        )
        .unwrap();
        assert!(fit.effective_rank <= 2);
    }

    #[test]
    fn criteria_values() {
        let fit = FitRecord::new(
            ModelKey::CoordSubset(vec![0, 1]),
            vec![0.0; 10],
            4.0,
            2,
        );
        // rss = 4, pen = 2, n = 10, D = 2 -> 4 (1 + 2/8) = 5
        assert_eq!(crit_residual_scale(&fit, 2.0, 10).unwrap(), 5.0);
        assert_eq!(crit_residual_scale(&fit, 0.0, 10).unwrap(), 4.0);
        // pen' = 0, rss = n -> 0
        let fit = FitRecord::new(ModelKey::CoordSubset(vec![]), vec![0.0; 10], 10.0, 0);
        assert_eq!(crit_log_scale(&fit, 0.0, 10).unwrap(), 0.0);
        // pen* = 0, rss = N_m -> 0
        let fit = FitRecord::new(ModelKey::CoordSubset(vec![0]), vec![0.0; 9], 8.0, 1);
        assert_eq!(crit_kullback_log(&fit, 0.0).unwrap(), 0.0);
        // saturation
        let fit = FitRecord::new(ModelKey::CoordSubset(vec![0]), vec![0.0; 9], 0.0, 1);
        assert_eq!(crit_log_scale(&fit, 0.0, 9), Err(Error::SaturatedFit));
    }

    #[test]
    fn pythagoras_and_idempotence() {
        // random-ish fixed instance
        let y = [1.3, -0.2, 4.1, 0.7, -2.2, 3.3];
        let x = DesignMatrix::from_columns(vec![
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.3, -1.2, 2.0, 0.1, 1.4, -0.5],
            vec![2.0, 0.0, 1.0, -1.0, 0.5, 0.2],
        ])
        .unwrap();
        let design = Design::with_matrix(&x);
        let model = ModelKey::ColumnSubset(vec![0, 1, 2]);
        let fit = project(&y, &model, &design).unwrap();
        let pyth = norm_sq(&y) - norm_sq(&fit.mu_hat);
        assert!((fit.rss - pyth).abs() <= 1e-8 * fit.rss.max(1.0));
        let refit = project(&fit.mu_hat, &model, &design).unwrap();
        for (a, b) in refit.mu_hat.iter().zip(&fit.mu_hat) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
