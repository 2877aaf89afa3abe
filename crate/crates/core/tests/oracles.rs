//! Independent oracles for the numerical kernels: quadrature for the
//! special functions, Monte Carlo for the expectation functionals, and
//! hand re-derivations for closed-form values. Every oracle here computes
//! its expected value through a route different from the implementation's.

mod common;

use common::{adaptive_simpson, normal_equations_rss, normals};
use penselect::collection::ModelKey;
use penselect::estimate::{project, Design, DesignMatrix};
use penselect::kullback::{kl_bias, kl_div, ThetaPair};
use penselect::penalty::{pen_kl, pen_kl_upper, pen_kullback, pen_kullback_upper, phi, phi_inv};
use penselect::rng::{sample_chisq, RngStream};
use penselect::root::solve_monotone;
use penselect::special::{chisq_sf, fisher_sf, ln_beta, ln_binomial};
use penselect::tail::{dkhi, dkhi_mc, dkhi_upper, edkhi, fish, fish_mc, fish_upper, DkhiArgs, FishArgs};

#[test]
fn ln_beta_matches_quadrature() {
    // B(5.5, 10.5) = integral of t^4.5 (1-t)^9.5 dt over [0, 1]
    let oracle = adaptive_simpson(|t| t.powf(4.5) * (1.0 - t).powf(9.5), 0.0, 1.0, 1e-19);
    let got = ln_beta(5.5, 10.5).unwrap();
    assert!(
        (got - oracle.ln()).abs() < 1e-12 * oracle.ln().abs(),
        "ln_beta = {got}, quadrature gives {}",
        oracle.ln()
    );
    // half-integer recurrence from B(0.5, 0.5) = pi, independent route:
    // B(a+1, b) = B(a, b) * a / (a + b)
    let mut b = std::f64::consts::PI;
    let (mut a_cur, mut b_cur) = (0.5, 0.5);
    for _ in 0..5 {
        b *= a_cur / (a_cur + b_cur);
        a_cur += 1.0;
    }
    for _ in 0..10 {
        b *= b_cur / (a_cur + b_cur);
        b_cur += 1.0;
    }
    assert!((got - b.ln()).abs() < 1e-12 * b.ln().abs());
}

fn fisher_density_ln(d1: f64, d2: f64, ln_b: f64, y: f64) -> f64 {
    0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * y.ln()
        - 0.5 * (d1 + d2) * (1.0 + d1 * y / d2).ln()
        - ln_b
}

#[test]
fn fisher_sf_matches_density_quadrature() {
    // P(F_{2,10} >= 4): integrate the density through the substitution
    // y = 1/u, with B(1, 5) = 1/5 exactly (independent of ln_gamma)
    let ln_b = (0.2f64).ln();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let y = 1.0 / u;
        (fisher_density_ln(2.0, 10.0, ln_b, y)).exp() / (u * u)
    };
    let oracle = adaptive_simpson(integrand, 0.0, 0.25, 1e-16);
    let got = fisher_sf(2, 10, 4.0).unwrap();
    assert!(
        (got - oracle).abs() < 1e-10 * oracle,
        "sf = {got}, quadrature = {oracle}"
    );
    // exact rational for the same value: (5/9)^5
    let exact = (5.0f64 / 9.0).powi(5);
    assert!((got - exact).abs() < 1e-12 * exact);
}

#[test]
fn chisq_sf_matches_density_quadrature() {
    // P(chi2_5 >= 5): density x^{3/2} e^{-x/2} / (2^{5/2} Gamma(5/2)),
    // Gamma(5/2) = 3 sqrt(pi) / 4 exactly
    let gamma_52 = 3.0 * std::f64::consts::PI.sqrt() / 4.0;
    let norm = 2.0f64.powf(2.5) * gamma_52;
    let density = |x: f64| x.powf(1.5) * (-x / 2.0).exp() / norm;
    let oracle = adaptive_simpson(density, 5.0, 140.0, 1e-16);
    let got = chisq_sf(5, 5.0).unwrap();
    assert!(
        (got - oracle).abs() < 1e-10 * oracle,
        "sf = {got}, quadrature = {oracle}"
    );
}

#[test]
fn dkhi_matches_definition_monte_carlo() {
    // closed form against the defining expectation at 10^7 paired draws
    let args = DkhiArgs::new(2, 10, 5.0).unwrap();
    let closed = dkhi(&args).unwrap();
    let (est, se) = dkhi_mc(&args, 10_000_000, &RngStream::new(42, 1)).unwrap();
    assert!(
        (closed - est).abs() <= 4.0 * se,
        "closed {closed} vs mc {est} +/- {se}"
    );
}

#[test]
fn fish_matches_definition_monte_carlo() {
    let args = FishArgs::new(2, 10, 3.0).unwrap();
    let closed = fish(&args).unwrap();
    let (est, se) = fish_mc(&args, 10_000_000, &RngStream::new(42, 2)).unwrap();
    assert!(
        (closed - est).abs() <= 4.0 * se,
        "closed {closed} vs mc {est} +/- {se}"
    );
}

#[test]
fn tail_functionals_strictly_decrease_on_grid() {
    for d in [1u32, 2, 5, 10, 20] {
        for n in [3u32, 5, 10, 30, 60] {
            let mut prev_d = f64::INFINITY;
            let mut prev_f = f64::INFINITY;
            for x in [0.1, 1.0, 5.0, 20.0, 100.0] {
                let vd = dkhi(&DkhiArgs::new(d, n, x).unwrap()).unwrap();
                let vf = fish(&FishArgs::new(d, n, x).unwrap()).unwrap();
                assert!(vd < prev_d, "dkhi not decreasing at ({d},{n},{x})");
                assert!(vf < prev_f, "fish not decreasing at ({d},{n},{x})");
                assert!((0.0..=1.0).contains(&vd) && (0.0..=1.0).contains(&vf));
                prev_d = vd;
                prev_f = vf;
            }
        }
    }
}

#[test]
fn upper_bounds_dominate_on_grid() {
    for d in [2u32, 4, 10, 20] {
        for n in [3u32, 10, 30, 60] {
            for factor in [1.0, 1.5, 3.0, 10.0, 40.0] {
                // the beta-form bound is exactly attained at D = 2, so the
                // comparison allows rounding-level ties
                let x = d as f64 * factor;
                let v = dkhi(&DkhiArgs::new(d, n, x).unwrap()).unwrap();
                let u = dkhi_upper(&DkhiArgs::new(d, n, x).unwrap()).unwrap();
                assert!(
                    u >= v * (1.0 - 1e-12),
                    "dkhi bound fails at ({d},{n},{x}): {u} < {v}"
                );
                let xf = n as f64 / (n as f64 - 2.0) * factor;
                let v = fish(&FishArgs::new(d, n, xf).unwrap()).unwrap();
                let u = fish_upper(&FishArgs::new(d, n, xf).unwrap()).unwrap();
                assert!(
                    u >= v * (1.0 - 1e-12),
                    "fish bound fails at ({d},{n},{xf}): {u} < {v}"
                );
            }
        }
    }
}

#[test]
fn dkhi_upper_value_re_derived() {
    // (4, 30, 20): assemble the three bounds with exact rational
    // B(15, 3) = 2 / (15 * 16 * 17) and independently written expressions
    let (d, n, x) = (4.0f64, 30.0f64, 20.0f64);
    let b_exact = 2.0 / (15.0 * 16.0 * 17.0);
    let b1 = (1.0 / b_exact)
        * (n / (n + x)).powf(n / 2.0)
        * (x / (n + x)).powf(d / 2.0)
        * 2.0
        * (2.0 * x + n * d)
        / (n * (n + 2.0) * x);
    let t = (n + 2.0) * x / (n * d);
    let b2 = (1.0 + 2.0 * x / (n * d)) * fisher_sf(4, 32, t).unwrap();
    let psi = phi(t).unwrap() - d * (t - 1.0) * (t - 1.0) / (4.0 * (d + n + 2.0));
    let b3 = (1.0 + 2.0 * x / (n * d)) * (-d * psi).exp();
    let oracle = b1.min(b2).min(b3);
    let got = dkhi_upper(&DkhiArgs::new(4, 30, 20.0).unwrap()).unwrap();
    assert!(
        (got - oracle).abs() < 1e-10 * oracle,
        "dkhi_upper = {got}, re-derived = {oracle}"
    );
    // quadrature cross-check of the dominated functional itself
    let exact = dkhi(&DkhiArgs::new(4, 30, 20.0).unwrap()).unwrap();
    assert!(got >= exact);
}

#[test]
fn fish_upper_value_re_derived() {
    // (4, 12, 3): B(2, 6) = 1/42 exactly
    let (d, n, x) = (4.0f64, 12.0f64, 3.0f64);
    let b_exact = 1.0 / 42.0;
    let c1 = (2.0 / b_exact)
        * (n / (n + d * x)).powf(n / 2.0)
        * (d * x / (n + d * x)).powf(d / 2.0 - 1.0)
        * (2.0 * x + n)
        / (n * n);
    let c2 = (1.0 + 2.0 * x / n) * fisher_sf(4, 12, (n - 2.0) * x / n).unwrap();
    let oracle = c1.min(c2);
    let got = fish_upper(&FishArgs::new(4, 12, 3.0).unwrap()).unwrap();
    assert!(
        (got - oracle).abs() < 1e-10 * oracle,
        "fish_upper = {got}, re-derived = {oracle}"
    );
}

#[test]
fn solve_monotone_inverts_dkhi() {
    let target = dkhi(&DkhiArgs::new(3, 20, 7.0).unwrap()).unwrap();
    let x = solve_monotone(
        |x| dkhi(&DkhiArgs::new(3, 20, x).unwrap()).unwrap(),
        target,
        1.0,
    )
    .unwrap();
    assert!((x - 7.0).abs() < 1e-6, "roundtrip gave {x}");
}

#[test]
fn phi_inv_matches_plain_bisection() {
    // a = ln 512, oracle: plain bisection on phi over [1, 64]
    let a = 512.0f64.ln();
    let (mut lo, mut hi) = (1.0f64, 64.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid).unwrap() < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let got = phi_inv(a).unwrap();
    assert!(
        (got - oracle).abs() < 1e-8 * oracle,
        "phi_inv = {got}, bisection = {oracle}"
    );
    // phi_inv(a) > 2a + 1 always; the asymptotic scale is 2a + O(ln a)
    assert!(got > 2.0 * a + 1.0);
    assert!(got < 3.0 * a);
}

#[test]
fn pen_kl_roundtrips_through_the_tail_identity() {
    // K = 1.1, n = 32, D = 2, L = ln C(32,2) + 2 ln 3; unwinding the
    // penalty must reproduce e^{-L} through the tail functional
    let n = 32usize;
    let d = 2usize;
    let l = ln_binomial(32, 2).unwrap() + 2.0 * 3.0f64.ln();
    let pen = pen_kl(1.1, l, d, n).unwrap();
    assert!(pen.is_finite() && pen > 0.0);
    let nm = (n - d) as f64;
    let x = pen / (1.1 * nm / (nm - 1.0));
    let q = dkhi(&DkhiArgs::new(d as u32 + 1, (nm - 1.0) as u32, x).unwrap()).unwrap();
    assert!(
        (q.ln() + l).abs() < 1e-7 * l,
        "unwound tail probability off: ln q = {}, -L = {}",
        q.ln(),
        -l
    );
}

#[test]
fn pen_upper_bounds_dominate_on_grid() {
    // exact inequality, no tolerance
    let k = 1.1;
    for n in [12usize, 32, 100] {
        for d in 0..=(n / 2).min(20) {
            for l in [0.0, 0.5, 3.0, 10.0, 60.0] {
                let okay_upper = if d == 0 { n - d >= 4 } else { n - d >= 7 };
                if !okay_upper {
                    continue;
                }
                let pen = pen_kl(k, l, d, n).unwrap();
                let upper = pen_kl_upper(k, l, d, n).unwrap();
                assert!(
                    pen <= upper,
                    "pen_kl {pen} > bound {upper} at (D={d}, L={l}, n={n})"
                );
            }
        }
    }
    for n in [20usize, 50] {
        for d in 1..=(n - 9).min(12) {
            for l in [0.0, 1.0, 5.0, 20.0] {
                let pen = pen_kullback(2.0, 3.0, l, d, n).unwrap();
                let upper = pen_kullback_upper(2.0, 3.0, l, d, n).unwrap();
                assert!(
                    pen <= upper,
                    "pen_kullback {pen} > bound {upper} at (D={d}, L={l}, n={n})"
                );
            }
        }
    }
}

#[test]
fn pen_kl_upper_value_re_derived() {
    // D = 5, L = 10, n = 100, K = 1.1: independent re-derivation
    let (k, l, d, n) = (1.1f64, 10.0f64, 5usize, 100usize);
    let nn = (n - d - 1) as f64; // N = N_m - 1
    let dd = (d + 1) as f64; // D = D_m + 1
    let delta = (l + 5.0f64.ln() + 1.0 / nn) / (1.0 - 5.0 / nn);
    let root = ((1.0 + 2.0 * dd / (nn + 2.0)) * (2.0 * delta / dd)).sqrt();
    let oracle = k * (nn + 1.0) / nn * (1.0 + (2.0 * delta / (nn + 2.0)).exp() * root).powi(2) * dd;
    let got = pen_kl_upper(k, l, d, n).unwrap();
    assert!((got - oracle).abs() < 1e-12 * oracle);
}

#[test]
fn pen_kullback_roundtrips_through_efish() {
    use penselect::tail::efish;
    // K1 = K2 = 2, D = 3, n = 50, L = 5
    let (k1, k2, l, d, n) = (2.0, 2.0, 5.0, 3usize, 50usize);
    let pen = pen_kullback(k1, k2, l, d, n).unwrap();
    let nm = (n - d) as f64;
    let x = efish(d as u32 + 1, (nm - 1.0) as u32, (-l as f64).exp()).unwrap();
    let oracle = k2 / (k2 - 1.0) * (k1 * (d as f64 + 1.0) * nm / (nm - 1.0) * x - d as f64).max(0.0);
    assert!((pen - oracle).abs() < 1e-9 * oracle.max(1.0));
}

#[test]
fn inverse_chisq_moments_match_closed_form_small() {
    // light version of the moment identity (the full 10^7-draw run lives
    // in the acceptance suite): N = 10, p = 1 at 2 * 10^6 draws
    let draws = sample_chisq(&RngStream::new(7, 11), 10, 2_000_000).unwrap();
    let mut acc = penselect::rng::MeanAccumulator::new();
    for v in &draws {
        acc.push(1.0 / v);
    }
    let expect = 1.0 / 8.0;
    assert!(
        (acc.mean() - expect).abs() <= 4.0 * acc.std_error(),
        "mean 1/V = {} vs {expect} +/- {}",
        acc.mean(),
        acc.std_error()
    );
}

#[test]
fn column_projection_matches_normal_equations_on_random_instances() {
    for inst in 0..50u64 {
        let n = 10 + (inst as usize % 5);
        let n_cols = 4 + (inst as usize % 3);
        let flat = normals(1000 + inst, 0, n * n_cols);
        let cols: Vec<Vec<f64>> = flat.chunks(n).map(|c| c.to_vec()).collect();
        let y = normals(2000 + inst, 1, n);
        let subset: Vec<usize> = (0..n_cols).filter(|j| (inst >> j) & 1 == 0).collect();
        let picked: Vec<Vec<f64>> = subset.iter().map(|&j| cols[j].clone()).collect();
        let oracle = normal_equations_rss(&picked, &y);
        let x = DesignMatrix::from_columns(cols).unwrap();
        let fit = project(&y, &ModelKey::ColumnSubset(subset), &Design::with_matrix(&x)).unwrap();
        assert!(
            (fit.rss - oracle).abs() <= 1e-8 * oracle.max(1.0),
            "instance {inst}: rss {} vs normal equations {oracle}",
            fit.rss
        );
    }
}

#[test]
fn kullback_bias_identity_on_random_instances() {
    // closed form vs the divergence composition, 500 instances
    for inst in 0..500u64 {
        let n = 6 + (inst as usize % 10);
        let mu = normals(3000 + inst, 0, n);
        let sigma2 = 0.3 + (inst as f64 % 7.0) * 0.5;
        let keep: Vec<usize> = (0..n).filter(|i| (inst >> (i % 8)) & 1 == 0).collect();
        let model = ModelKey::CoordSubset(keep);
        let direct = kl_bias(&mu, sigma2, &model, &Design::none()).unwrap();
        let fit = project(&mu, &model, &Design::none()).unwrap();
        // (7.1) closed form
        let nf = n as f64;
        let closed = nf / 2.0 * (1.0 + fit.rss / (nf * sigma2)).ln();
        // divergence to theta_m = (mu_m, sigma^2 + |mu - mu_m|^2 / n)
        let theta = ThetaPair::new(mu.clone(), sigma2).unwrap();
        let theta_m = ThetaPair::new(fit.mu_hat.clone(), sigma2 + fit.rss / nf).unwrap();
        let composed = kl_div(&theta, &theta_m).unwrap();
        let tol = 1e-10 * direct.abs().max(1.0);
        assert!((direct - closed).abs() <= tol, "closed form off at {inst}");
        assert!((direct - composed).abs() <= tol, "composition off at {inst}");
    }
}

#[test]
fn edkhi_inversion_grid_spot_checks() {
    for (d, n) in [(1u32, 8u32), (3, 20), (10, 35)] {
        for q in [0.5, 1e-2, 1e-6] {
            let x = edkhi(d, n, q).unwrap();
            let back = dkhi(&DkhiArgs::new(d, n, x).unwrap()).unwrap();
            assert!(
                (back - q).abs() <= 1e-8 * q,
                "({d},{n},{q}): back = {back}"
            );
        }
    }
}
