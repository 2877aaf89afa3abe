//! Penalty rules: the data-driven penalty built on EDkhi, its analytic
//! upper bound, the classical FPE/AIC/BIC/AMDL penalties, the minimal
//! penalty threshold with its feasibility check, the Kullback-mode penalty
//! built on EFish, and the pen/pen' conversion between the two criterion
//! scales.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimate::Criterion;
use crate::root::solve_monotone;
use crate::tail::{edkhi_ln_q, efish_ln_q};
#[allow(unused_imports)]
use num_traits::Float;

/// `phi(x) = (x - 1 - ln x) / 2` for `x >= 1`.
pub fn phi(x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::Domain(format!("phi requires x >= 1, got {x}")));
    }
    Ok((x - 1.0 - x.ln()) / 2.0)
}

/// Inverse of `phi` on its increasing branch: the unique `x >= 1` with
/// `phi(x) = a`.
pub fn phi_inv(a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("phi_inv requires a >= 0, got {a}")));
    }
    if a == 0.0 {
        return Ok(1.0);
    }
    // solve on the shifted decreasing function t -> -phi(1 + t)
    let t = solve_monotone(
        |t| -((1.0 + t) - 1.0 - (1.0 + t).ln()) / 2.0,
        -a,
        2.0 * a + 1.0,
    )?;
    Ok(1.0 + t)
}

fn check_n_d(n: usize, d: usize, min_nm: usize, op: &str) -> Result<usize> {
    if d >= n || n - d < min_nm {
        return Err(Error::Domain(format!(
            "{op} requires n - D >= {min_nm}, got n = {n}, D = {d}"
        )));
    }
    Ok(n - d)
}

/// Data-driven penalty `K * N_m/(N_m - 1) * EDkhi[D + 1, N_m - 1, e^{-L}]`.
///
/// `e^{-L}` is handled in log space, so weights such as
/// `L = ln C(8192, 1000)` are fine.
pub fn pen_kl(k: f64, l: f64, d: usize, n: usize) -> Result<f64> {
    if !(k > 1.0) {
        return Err(Error::Domain(format!("pen_kl requires K > 1, got {k}")));
    }
    if !(l >= 0.0) {
        return Err(Error::Domain(format!("pen_kl requires L >= 0, got {l}")));
    }
    let nm = check_n_d(n, d, 2, "pen_kl")? as f64;
    let x = edkhi_ln_q(d as u32 + 1, (nm - 1.0) as u32, -l)?;
    Ok(k * nm / (nm - 1.0) * x)
}

/// Analytic upper bound on [`pen_kl`]. For `D >= 1` it needs `N_m >= 7`;
/// for `D = 0` it needs `N_m >= 4`.
pub fn pen_kl_upper(k: f64, l: f64, d: usize, n: usize) -> Result<f64> {
    if !(k > 1.0) {
        return Err(Error::Domain(format!(
            "pen_kl_upper requires K > 1, got {k}"
        )));
    }
    if !(l >= 0.0) {
        return Err(Error::Domain(format!(
            "pen_kl_upper requires L >= 0, got {l}"
        )));
    }
    if d == 0 {
        let nm = check_n_d(n, 0, 4, "pen_kl_upper (D = 0)")? as f64;
        let nn = nm - 1.0;
        let bracket = 1.0 + (2.0 * l / nn).exp() * ((1.0 + 6.0 / nn) * 2.0 * l / 3.0).sqrt();
        Ok(3.0 * k * (nn + 1.0) / nn * bracket * bracket)
    } else {
        let nm = check_n_d(n, d, 7, "pen_kl_upper")? as f64;
        let dd = d as f64 + 1.0;
        let nn = nm - 1.0;
        let delta = (l + 5.0_f64.ln() + 1.0 / nn) / (1.0 - 5.0 / nn);
        let bracket = 1.0
            + (2.0 * delta / (nn + 2.0)).exp()
                * ((1.0 + 2.0 * dd / (nn + 2.0)) * 2.0 * delta / dd).sqrt();
        Ok(k * (nn + 1.0) / nn * bracket * bracket * dd)
    }
}

/// Classical criteria in penalty (`Crit_L`) form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicalKind {
    Fpe,
    Aic,
    Bic,
    Amdl,
}

/// FPE: `2D`. AIC/BIC/AMDL: `(n - D)(e^{cD ln(n)/n} - 1)` with
/// `c ln n = 2, ln n, 3 ln n` respectively.
pub fn pen_classical(kind: ClassicalKind, d: usize, n: usize) -> Result<f64> {
    if n < 1 || d > n - 1 {
        return Err(Error::Domain(format!(
            "pen_classical requires 0 <= D <= n - 1, got D = {d}, n = {n}"
        )));
    }
    let (df, nf) = (d as f64, n as f64);
    Ok(match kind {
        ClassicalKind::Fpe => 2.0 * df,
        ClassicalKind::Aic => (nf - df) * (2.0 * df / nf).exp_m1(),
        ClassicalKind::Bic => (nf - df) * (df * nf.ln() / nf).exp_m1(),
        ClassicalKind::Amdl => (nf - df) * (3.0 * df * nf.ln() / nf).exp_m1(),
    })
}

/// Direction of the pen/pen' bijection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvertDirection {
    /// `pen -> pen' = n ln(1 + pen/(n - D))`
    PenToPrime,
    /// `pen' -> pen = (n - D)(e^{pen'/n} - 1)`
    PrimeToPen,
}

/// The exact bijection linking the penalties of the residual-scale and
/// log-scale criteria; they select the same model.
pub fn pen_convert(pen: f64, d: usize, n: usize, direction: ConvertDirection) -> Result<f64> {
    if d >= n {
        return Err(Error::Domain(format!(
            "pen_convert requires n > D, got n = {n}, D = {d}"
        )));
    }
    let (nf, nm) = (n as f64, (n - d) as f64);
    Ok(match direction {
        ConvertDirection::PenToPrime => nf * (pen / nm).ln_1p(),
        ConvertDirection::PrimeToPen => nm * (pen / nf).exp_m1(),
    })
}

/// Minimal penalty `K^2 phi^{-1}(a) D`; below this scale selection
/// overfits.
pub fn pen_minimal(k: f64, a: f64, d: usize) -> Result<f64> {
    if !(k > 1.0) {
        return Err(Error::Domain(format!(
            "pen_minimal requires K > 1, got {k}"
        )));
    }
    Ok(k * k * phi_inv(a)? * d as f64)
}

/// Feasibility report for the dimension-cap assumption attached to a
/// complexity index `(M, a)` and constant `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct HkaReport {
    pub t: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub d_max: usize,
    pub feasible: bool,
    /// Residual constant of the associated risk bound; diagnostic only,
    /// never asserted.
    pub residual: f64,
}

/// Computes `t = K phi^{-1}(a)`, the dimension cap
/// `D_max = floor((n - gamma1)_+) /\ floor(((n+2) gamma2 - 1)_+)` and
/// whether the requested maximal dimension fits under it.
pub fn hka_check(k: f64, m: f64, a: f64, n: usize, d_max_requested: usize) -> Result<HkaReport> {
    if !(k > 1.0) || !(m >= 0.0) || !(a >= 0.0) {
        return Err(Error::Domain(format!(
            "hka_check requires K > 1, M >= 0, a >= 0, got K = {k}, M = {m}, a = {a}"
        )));
    }
    let t = k * phi_inv(a)?;
    if t <= 1.0 {
        return Ok(HkaReport {
            t,
            gamma1: f64::INFINITY,
            gamma2: 0.0,
            d_max: 0,
            feasible: false,
            residual: f64::INFINITY,
        });
    }
    let gamma1 = (2.0 * t).max((t + 1.0) / (t - 1.0));
    let gamma2 = 2.0 * phi(k)? / ((t - 1.0) * (t - 1.0));
    let nf = n as f64;
    let cap1 = (nf - gamma1).max(0.0).floor();
    let cap2 = ((nf + 2.0) * gamma2 - 1.0).max(0.0).floor();
    let d_max = cap1.min(cap2) as usize;
    let residual = k / (k - 1.0)
        * (k * k * phi_inv(a)?
            + 2.0 * k
            + 8.0 * k * m * (-a).exp() / ((phi(k)? / 2.0).exp() - 1.0).powi(2));
    Ok(HkaReport {
        t,
        gamma1,
        gamma2,
        d_max,
        feasible: d_max_requested <= d_max,
        residual,
    })
}

/// Kullback-mode penalty
/// `K2/(K2-1) [K1 (D+1) N_m/(N_m-1) EFish(D+1, N_m-1, e^{-L}) - D]_+`.
pub fn pen_kullback(k1: f64, k2: f64, l: f64, d: usize, n: usize) -> Result<f64> {
    if !(k1 > 1.0) || !(k2 >= k1) {
        return Err(Error::Domain(format!(
            "pen_kullback requires K2 >= K1 > 1, got K1 = {k1}, K2 = {k2}"
        )));
    }
    if !(l >= 0.0) {
        return Err(Error::Domain(format!(
            "pen_kullback requires L >= 0, got {l}"
        )));
    }
    let nm = check_n_d(n, d, 2, "pen_kullback")? as f64;
    if l == 0.0 {
        // EFish at q = 1 is 0, so the positive part vanishes for D >= 1
        // and equals 0 at D = 0 as well
        return Ok(0.0);
    }
    let (df, dd) = (d as f64, d as u32 + 1);
    let x = efish_ln_q(dd, (nm - 1.0) as u32, -l)?;
    let inner = k1 * (df + 1.0) * nm / (nm - 1.0) * x - df;
    Ok(k2 / (k2 - 1.0) * inner.max(0.0))
}

/// Analytic upper bound on [`pen_kullback`]; requires `D >= 1` and
/// `N_m >= 9`.
pub fn pen_kullback_upper(k1: f64, k2: f64, l: f64, d: usize, n: usize) -> Result<f64> {
    if !(k1 > 1.0) || !(k2 >= k1) {
        return Err(Error::Domain(format!(
            "pen_kullback_upper requires K2 >= K1 > 1, got K1 = {k1}, K2 = {k2}"
        )));
    }
    if d < 1 {
        return Err(Error::Domain(format!(
            "pen_kullback_upper requires D >= 1, got {d}"
        )));
    }
    if !(l >= 0.0) {
        return Err(Error::Domain(format!(
            "pen_kullback_upper requires L >= 0, got {l}"
        )));
    }
    let nm = check_n_d(n, d, 9, "pen_kullback_upper")? as f64;
    let dd = d as f64 + 1.0;
    let nn = nm - 1.0;
    let delta = (l + 5.0_f64.ln() + 1.0 / (nn - 2.0)) / (1.0 - 5.0 / (nn - 2.0));
    let bracket =
        1.0 + (2.0 * delta / nn).exp() * ((1.0 + 2.0 * dd / nn) * 2.0 * delta / dd).sqrt();
    Ok(k1 * k2 / (k2 - 1.0) * (nn + 1.0) / (nn - 2.0) * bracket * bracket * dd)
}

/// A named penalty rule together with the sample size it applies to.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyKind {
    /// Data-driven rule; needs a per-model weight `L`.
    Kl { k: f64 },
    Fpe,
    Aic,
    Bic,
    Amdl,
    /// Minimal-penalty rule `K^2 phi^{-1}(a) D`.
    Minimal { k: f64, a: f64 },
    /// Kullback-mode rule; needs a per-model weight `L` and selects under
    /// the log-scale criterion.
    Kullback { k1: f64, k2: f64 },
    /// Explicit per-dimension penalty table.
    UserTable(BTreeMap<usize, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyRule {
    pub kind: PenaltyKind,
    pub n: usize,
}

impl PenaltyRule {
    pub fn new(kind: PenaltyKind, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!(
                "penalty rules require n >= 3, got {n}"
            )));
        }
        match &kind {
            PenaltyKind::Kl { k } if !(*k > 1.0) => {
                return Err(Error::Domain(format!("KL rule requires K > 1, got {k}")))
            }
            PenaltyKind::Minimal { k, .. } if !(*k > 1.0) => {
                return Err(Error::Domain(format!(
                    "minimal rule requires K > 1, got {k}"
                )))
            }
            PenaltyKind::Kullback { k1, k2 } if !(*k1 > 1.0 && k2 >= k1) => {
                return Err(Error::Domain(format!(
                    "Kullback rule requires K2 >= K1 > 1, got K1 = {k1}, K2 = {k2}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, n })
    }

    /// Penalty value for a model of dimension `d` carrying weight `l`.
    pub fn pen(&self, d: usize, l: f64) -> Result<f64> {
        match &self.kind {
            PenaltyKind::Kl { k } => pen_kl(*k, l, d, self.n),
            PenaltyKind::Fpe => pen_classical(ClassicalKind::Fpe, d, self.n),
            PenaltyKind::Aic => pen_classical(ClassicalKind::Aic, d, self.n),
            PenaltyKind::Bic => pen_classical(ClassicalKind::Bic, d, self.n),
            PenaltyKind::Amdl => pen_classical(ClassicalKind::Amdl, d, self.n),
            PenaltyKind::Minimal { k, a } => pen_minimal(*k, *a, d),
            PenaltyKind::Kullback { k1, k2 } => pen_kullback(*k1, *k2, l, d, self.n),
            PenaltyKind::UserTable(map) => map.get(&d).copied().ok_or_else(|| {
                Error::Domain(format!("user penalty table has no entry for D = {d}"))
            }),
        }
    }

    /// The criterion this rule's penalties are calibrated for.
    pub fn criterion(&self) -> Criterion {
        match self.kind {
            PenaltyKind::Kullback { .. } => Criterion::KullbackLog,
            _ => Criterion::ResidualScale,
        }
    }
}

/// Per-dimension penalty table.
///
/// Collections reuse dimensions heavily and the EDkhi inversion dominates
/// the cost of large searches, so rules are evaluated once per dimension
/// and read from this table afterwards. Build one per worker; lookups are
/// immutable.
#[derive(Debug, Clone)]
pub struct PenaltyTable {
    values: Vec<f64>,
}

impl PenaltyTable {
    /// Precompute `rule` for every dimension `0..=d_max` with weights
    /// from `weight_of`.
    pub fn build<W>(rule: &PenaltyRule, d_max: usize, weight_of: W) -> Result<Self>
    where
        W: Fn(usize) -> Result<f64>,
    {
        let mut values = Vec::with_capacity(d_max + 1);
        for d in 0..=d_max {
            values.push(rule.pen(d, weight_of(d)?)?);
        }
        Ok(Self { values })
    }

    pub fn d_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn get(&self, d: usize) -> Result<f64> {
        self.values.get(d).copied().ok_or_else(|| {
            Error::Domain(format!(
                "penalty table covers D <= {}, got D = {d}",
                self.d_max()
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_values() {
        assert_eq!(phi(1.0).unwrap(), 0.0);
        assert!((phi(2.0).unwrap() - 0.1534).abs() < 1e-4);
        let e = core::f64::consts::E;
        assert!((phi(e).unwrap() - (e - 2.0) / 2.0).abs() < 1e-15);
        assert!(phi(0.5).is_err());
    }

    #[test]
    fn phi_inv_roundtrip() {
        assert_eq!(phi_inv(0.0).unwrap(), 1.0);
        let x = phi_inv(phi(2.0).unwrap()).unwrap();
        assert!((x - 2.0).abs() < 1e-9);
        for &a in &[0.01, 0.5, 3.0, 20.0, 500.0] {
            let x = phi_inv(a).unwrap();
            assert!((phi(x).unwrap() - a).abs() < 1e-9 * a.max(1.0));
            // true lower bound: phi_inv(a) > 2a + 1
            assert!(x > 2.0 * a + 1.0);
        }
    }

    #[test]
    fn pen_kl_zero_weight_is_zero() {
        assert_eq!(pen_kl(1.1, 0.0, 2, 32).unwrap(), 0.0);
        assert!(pen_kl(1.0, 1.0, 2, 32).is_err());
        assert!(pen_kl(1.1, 1.0, 31, 32).is_err());
    }

    #[test]
    fn pen_kl_upper_formula_at_l0_d0() {
        // D = 0, L = 0, N_m = 10: bracket is 1, value 3K(N+1)/N with N = 9
        let k = 1.3;
        let v = pen_kl_upper(k, 0.0, 0, 10).unwrap();
        assert!((v - 3.0 * k * 10.0 / 9.0).abs() < 1e-12);
        // preconditions
        assert!(pen_kl_upper(1.1, 1.0, 1, 7).is_err()); // N_m = 6 < 7
        assert!(pen_kl_upper(1.1, 1.0, 0, 3).is_err()); // N_m = 3 < 4
    }

    #[test]
    fn classical_penalties() {
        assert_eq!(pen_classical(ClassicalKind::Fpe, 3, 10).unwrap(), 6.0);
        assert_eq!(pen_classical(ClassicalKind::Aic, 0, 50).unwrap(), 0.0);
        // AMDL lower bound 3 N_m D ln(n) / n
        for &(d, n) in &[(1usize, 32usize), (5, 32), (20, 512)] {
            let v = pen_classical(ClassicalKind::Amdl, d, n).unwrap();
            let lb = 3.0 * (n - d) as f64 * d as f64 * (n as f64).ln() / n as f64;
            assert!(v >= lb);
        }
        // AIC lower bound 2 N_m D / n
        let v = pen_classical(ClassicalKind::Aic, 4, 32).unwrap();
        assert!(v >= 2.0 * 28.0 * 4.0 / 32.0);
        assert!(pen_classical(ClassicalKind::Aic, 10, 10).is_err());
    }

    #[test]
    fn convert_roundtrip_and_bic_identity() {
        for &(pen, d, n) in &[(0.0, 0usize, 10usize), (3.7, 2, 25), (120.0, 5, 40)] {
            let p = pen_convert(pen, d, n, ConvertDirection::PenToPrime).unwrap();
            let back = pen_convert(p, d, n, ConvertDirection::PrimeToPen).unwrap();
            assert!((back - pen).abs() <= 1e-12 * (1.0 + pen));
        }
        // BIC: pen' = D ln n maps onto the classical pen form
        let (d, n) = (4usize, 60usize);
        let prime = d as f64 * (n as f64).ln();
        let pen = pen_convert(prime, d, n, ConvertDirection::PrimeToPen).unwrap();
        let direct = pen_classical(ClassicalKind::Bic, d, n).unwrap();
        assert!((pen - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn minimal_penalty() {
        assert_eq!(pen_minimal(2.0, 1.0, 0).unwrap(), 0.0);
        let v = pen_minimal(core::f64::consts::SQRT_2, 0.0, 10).unwrap();
        assert!((v - 20.0).abs() < 1e-12);
    }

    #[test]
    fn hka_matches_sqrt2_constants() {
        // K = sqrt(2), a = 0: gamma1 ~ 5.83, gamma2 ~ 0.394
        let r = hka_check(core::f64::consts::SQRT_2, 1.0, 0.0, 100, 10).unwrap();
        assert!((r.gamma1 - 5.828).abs() < 1e-2);
        assert!((r.gamma2 - 0.394).abs() < 1e-2);
        assert_eq!(
            r.d_max,
            (100usize - 6).min(((102.0 * r.gamma2 - 1.0).floor()) as usize)
        );
        assert!(r.feasible);
    }

    #[test]
    fn hka_gamma2_below_half() {
        for &k in &[1.01, 1.1, 1.5, 2.0, 5.0, 50.0] {
            for &a in &[0.0, 0.1, 1.0, 10.0] {
                let r = hka_check(k, 1.0, a, 50, 0).unwrap();
                assert!(r.gamma2 <= 0.5, "gamma2 = {} at K={k}, a={a}", r.gamma2);
            }
        }
    }

    #[test]
    fn kullback_penalty_zero_weight() {
        assert_eq!(pen_kullback(2.0, 2.0, 0.0, 3, 50).unwrap(), 0.0);
        assert!(pen_kullback(2.0, 1.5, 1.0, 3, 50).is_err());
    }

    #[test]
    fn kullback_upper_preconditions() {
        assert!(pen_kullback_upper(2.0, 2.0, 0.0, 1, 9).is_err()); // N_m = 8
        assert!(pen_kullback_upper(2.0, 2.0, 0.0, 0, 20).is_err());
        let v = pen_kullback_upper(2.0, 2.0, 0.0, 1, 20).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn rule_table_lookup() {
        let rule = PenaltyRule::new(PenaltyKind::Fpe, 20).unwrap();
        let table = PenaltyTable::build(&rule, 5, |_| Ok(0.0)).unwrap();
        assert_eq!(table.get(3).unwrap(), 6.0);
        assert!(table.get(6).is_err());
        let mut map = BTreeMap::new();
        map.insert(0usize, 0.0);
        map.insert(1, 4.5);
        let rule = PenaltyRule::new(PenaltyKind::UserTable(map), 20).unwrap();
        assert_eq!(rule.pen(1, 0.0).unwrap(), 4.5);
        assert!(rule.pen(2, 0.0).is_err());
    }
}
