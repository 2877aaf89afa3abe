//! The Dkhi and Fish tail functionals, their inverses EDkhi and EFish, and
//! analytic upper bounds for the deep-tail regime.
//!
//! `Dkhi[D, N, x]` is the normalized expected positive part
//! `E[(X_D - x X_N / N)_+] / E(X_D)` for independent chi-squares; `Fish` is
//! the analogue for a Fisher variable. Both admit exact expressions as a
//! difference of two Fisher tails, which is how they are evaluated here:
//! each tail is computed as a log-magnitude and the two are combined with a
//! compensated difference, since they nearly cancel for large thresholds.
//!
//! Inversion (EDkhi/EFish) solves the exact identity down to tail
//! probabilities of `exp(-500)`. Below that, following the deep-tail recipe,
//! the returned value is an upper bound obtained by inverting the sharp
//! analytic bound instead; the bound is asymptotically exact, so the
//! overshoot is negligible in that regime.

use alloc::format;

use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::rng::{chisq_gamma, MeanAccumulator, RngStream};
use crate::root::{refine_bracket, solve_monotone};
use crate::special::{fisher_sf_ln, ln_beta};
#[allow(unused_imports)]
use num_traits::Float;

/// Tail probabilities below `exp(-500)` switch to the bound-inversion
/// branch.
pub const SMALL_Q_LN_THRESHOLD: f64 = -500.0;

const LN_2: f64 = core::f64::consts::LN_2;

/// Arguments of the Dkhi functional: chi-square numerator and denominator
/// degrees of freedom and the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkhiArgs {
    pub d: u32,
    pub n: u32,
    pub x: f64,
}

impl DkhiArgs {
    pub fn new(d: u32, n: u32, x: f64) -> Result<Self> {
        let args = Self { d, n, x };
        args.validate()?;
        Ok(args)
    }

    fn validate(&self) -> Result<()> {
        if self.d < 1 || self.n < 1 {
            return Err(Error::Domain(format!(
                "Dkhi requires D >= 1 and N >= 1, got ({}, {})",
                self.d, self.n
            )));
        }
        if !(self.x >= 0.0) {
            return Err(Error::Domain(format!(
                "Dkhi requires x >= 0, got {}",
                self.x
            )));
        }
        Ok(())
    }
}

/// Arguments of the Fish functional. `N >= 3` is required for the Fisher
/// mean to be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FishArgs {
    pub d: u32,
    pub n: u32,
    pub x: f64,
}

impl FishArgs {
    pub fn new(d: u32, n: u32, x: f64) -> Result<Self> {
        let args = Self { d, n, x };
        args.validate()?;
        Ok(args)
    }

    fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::Domain(format!(
                "Fish requires D >= 1, got {}",
                self.d
            )));
        }
        if self.n < 3 {
            return Err(Error::Domain(format!(
                "Fish requires N >= 3 (finite Fisher mean), got {}",
                self.n
            )));
        }
        if !(self.x >= 0.0) {
            return Err(Error::Domain(format!(
                "Fish requires x >= 0, got {}",
                self.x
            )));
        }
        Ok(())
    }
}

/// Compensated combination `exp(ln_a) - exp(ln_b)` in ln, assuming the
/// true difference is nonnegative.
fn ln_diff_exp(ln_a: f64, ln_b: f64) -> f64 {
    if ln_a == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let delta = ln_b - ln_a;
    if delta >= 0.0 {
        // exact-math difference is >= 0; rounding pushed it over
        return f64::NEG_INFINITY;
    }
    ln_a + (-delta.exp_m1()).ln()
}

fn dkhi_ln_unchecked(d: u32, n: u32, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let (df, nf) = (d as f64, n as f64);
    let ln_t1 = fisher_sf_ln(d + 2, n, x / (df + 2.0))?;
    let ln_t2 = (x / df).ln() + fisher_sf_ln(d, n + 2, (nf + 2.0) * x / (df * nf))?;
    Ok(ln_diff_exp(ln_t1, ln_t2))
}

/// `Dkhi[D, N, x]`, evaluated through the Fisher-tail identity
/// `P(F_{D+2,N} >= x/(D+2)) - (x/D) P(F_{D,N+2} >= (N+2)x/(DN))`,
/// clamped to `[0, 1]`.
pub fn dkhi(args: &DkhiArgs) -> Result<f64> {
    args.validate()?;
    Ok(dkhi_ln_unchecked(args.d, args.n, args.x)?.exp().clamp(0.0, 1.0))
}

/// ln of `Dkhi[D, N, x]`; usable far below double underflow.
pub fn dkhi_ln(args: &DkhiArgs) -> Result<f64> {
    args.validate()?;
    dkhi_ln_unchecked(args.d, args.n, args.x)
}

/// Monte Carlo estimator of the defining expectation
/// `E[(X_D - x X_N / N)_+] / E(X_D)` with its standard error.
///
/// At `x = 0` the functional is identically 1, so `(1, 0)` is returned
/// without sampling.
pub fn dkhi_mc(args: &DkhiArgs, draws: u64, stream: &RngStream) -> Result<(f64, f64)> {
    args.validate()?;
    if draws < 10_000 {
        return Err(Error::Domain(format!(
            "dkhi_mc requires at least 10^4 draws, got {draws}"
        )));
    }
    if args.x == 0.0 {
        return Ok((1.0, 0.0));
    }
    let gd = chisq_gamma(args.d)?;
    let gn = chisq_gamma(args.n)?;
    let mut rng = stream.rng();
    let (df, nf) = (args.d as f64, args.n as f64);
    let mut acc = MeanAccumulator::new();
    for _ in 0..draws {
        let xd: f64 = gd.sample(&mut rng);
        let xn: f64 = gn.sample(&mut rng);
        acc.push((xd - args.x * xn / nf).max(0.0) / df);
    }
    Ok((acc.mean(), acc.std_error()))
}

/// `Fish[D, N, x] = E[(F_{D,N} - x)_+] / E(F_{D,N})`, through the identity
/// `P(F_{D+2,N-2} >= (N-2)Dx/((D+2)N)) - x (N-2)/N P(F_{D,N} >= x)`,
/// clamped to `[0, 1]`.
pub fn fish(args: &FishArgs) -> Result<f64> {
    args.validate()?;
    Ok(fish_ln_unchecked(args.d, args.n, args.x)?.exp().clamp(0.0, 1.0))
}

/// ln of `Fish[D, N, x]`.
pub fn fish_ln(args: &FishArgs) -> Result<f64> {
    args.validate()?;
    fish_ln_unchecked(args.d, args.n, args.x)
}

fn fish_ln_unchecked(d: u32, n: u32, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let (df, nf) = (d as f64, n as f64);
    let ln_t1 = fisher_sf_ln(d + 2, n - 2, (nf - 2.0) * df * x / ((df + 2.0) * nf))?;
    let ln_t2 = (x * (nf - 2.0) / nf).ln() + fisher_sf_ln(d, n, x)?;
    Ok(ln_diff_exp(ln_t1, ln_t2))
}

/// Monte Carlo estimator of `E[(F - x)_+] / E(F)` from Fisher draws.
pub fn fish_mc(args: &FishArgs, draws: u64, stream: &RngStream) -> Result<(f64, f64)> {
    args.validate()?;
    if draws < 10_000 {
        return Err(Error::Domain(format!(
            "fish_mc requires at least 10^4 draws, got {draws}"
        )));
    }
    if args.x == 0.0 {
        return Ok((1.0, 0.0));
    }
    let gd = chisq_gamma(args.d)?;
    let gn = chisq_gamma(args.n)?;
    let mut rng = stream.rng();
    let (df, nf) = (args.d as f64, args.n as f64);
    let mean_f = nf / (nf - 2.0);
    let mut acc = MeanAccumulator::new();
    for _ in 0..draws {
        let xd: f64 = gd.sample(&mut rng);
        let xn: f64 = gn.sample(&mut rng);
        let f = (xd / df) / (xn / nf);
        acc.push((f - args.x).max(0.0) / mean_f);
    }
    Ok((acc.mean(), acc.std_error()))
}

/// `EDkhi[D, N, q]`: the threshold `x` with `Dkhi[D, N, x] = q`.
pub fn edkhi(d: u32, n: u32, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!(
            "EDkhi requires q in (0, 1], got {q}"
        )));
    }
    edkhi_ln_q(d, n, q.ln())
}

/// `EDkhi` with the tail probability passed as `ln q`, so weights far
/// beyond double underflow (`L > 700`) stay representable.
///
/// For `ln q < -500` the exact identity can no longer be resolved and the
/// result is an upper bound for EDkhi, obtained by inverting the deep-tail
/// bound (beta form for `D >= 2`, the dominant Fisher term for `D = 1`).
pub fn edkhi_ln_q(d: u32, n: u32, ln_q: f64) -> Result<f64> {
    DkhiArgs::new(d, n, 0.0)?;
    if !(ln_q <= 0.0) {
        return Err(Error::Domain(format!(
            "EDkhi requires ln q <= 0, got {ln_q}"
        )));
    }
    if ln_q == 0.0 {
        return Ok(0.0);
    }
    if ln_q >= SMALL_Q_LN_THRESHOLD {
        let hint = hint_for(d, n, ln_q);
        return solve_monotone(
            |x| dkhi_ln_unchecked(d, n, x).unwrap_or(f64::NEG_INFINITY),
            ln_q,
            hint,
        );
    }
    if d >= 2 {
        let ln_b = ln_beta(n as f64 / 2.0, 1.0 + d as f64 / 2.0)?;
        invert_decreasing_from(
            |x| ln_dkhi_bound_beta(d as f64, n as f64, x, ln_b),
            d as f64,
            ln_q,
        )
    } else {
        // D = 1: dominant term of the tail identity, Dkhi(1,N,x) <= P(F_{3,N} >= x/3)
        solve_monotone(
            |x| fisher_sf_ln(3, n, x / 3.0).unwrap_or(f64::NEG_INFINITY),
            ln_q,
            hint_for(d, n, ln_q),
        )
    }
}

/// `EFish[D, N, q]`: solution of `Fish[D, N, x] = q`, with the convention
/// that `q > 1` maps to 0.
pub fn efish(d: u32, n: u32, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("EFish requires q > 0, got {q}")));
    }
    if q > 1.0 {
        return Ok(0.0);
    }
    efish_ln_q(d, n, q.ln())
}

/// `EFish` with the tail probability passed as `ln q`; same deep-tail
/// strategy as [`edkhi_ln_q`].
pub fn efish_ln_q(d: u32, n: u32, ln_q: f64) -> Result<f64> {
    FishArgs::new(d, n, 0.0)?;
    if ln_q >= 0.0 {
        return Ok(0.0);
    }
    if ln_q >= SMALL_Q_LN_THRESHOLD {
        let hint = hint_for(d, n, ln_q);
        return solve_monotone(
            |x| fish_ln_unchecked(d, n, x).unwrap_or(f64::NEG_INFINITY),
            ln_q,
            hint,
        );
    }
    if d >= 2 {
        let ln_b = ln_beta(d as f64 / 2.0, n as f64 / 2.0)?;
        let lo = n as f64 / (n as f64 - 2.0);
        invert_decreasing_from(
            |x| ln_fish_bound_beta(d as f64, n as f64, x, ln_b),
            lo,
            ln_q,
        )
    } else {
        // D = 1: dominant term of (the Fish identity),
        // Fish(1,N,x) <= P(F_{3,N-2} >= (N-2)x/(3N))
        let nf = n as f64;
        solve_monotone(
            |x| fisher_sf_ln(3, n - 2, (nf - 2.0) * x / (3.0 * nf)).unwrap_or(f64::NEG_INFINITY),
            ln_q,
            hint_for(d, n, ln_q),
        )
    }
}

/// Rough scale of the root, used to seed bracket doubling. The tail decays
/// like `(1 + x/N)^{-N/2}`, so the root grows like `N e^{2L/N}` when the
/// weight `L` is large relative to `N`.
fn hint_for(d: u32, n: u32, ln_q: f64) -> f64 {
    let l = -ln_q;
    let base = d as f64 + n as f64 + 2.0 * l + 2.0 * (l * d as f64).sqrt() + 1.0;
    let tail = n as f64 * (2.0 * l / n as f64).exp().min(1e290);
    (base + tail).min(1e300)
}

/// Bracket-and-refine for a decreasing function on `[lo, inf)`.
fn invert_decreasing_from<F>(f: F, lo: f64, target: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let flo = f(lo);
    if flo < target {
        return Err(Error::NoSolution {
            target,
            at_zero: flo,
        });
    }
    if flo == target {
        return Ok(lo);
    }
    let mut prev = lo;
    let mut fprev = flo;
    let mut hi = 2.0 * lo.max(1.0);
    let mut fhi = f(hi);
    let mut doublings = 0;
    while fhi > target {
        prev = hi;
        fprev = fhi;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Divergence { last_hi: hi });
        }
        hi *= 2.0;
        fhi = f(hi);
    }
    refine_bracket(f, target, prev, fprev, hi, fhi)
}

/// ln of the beta-form deep-tail bound on Dkhi (valid for `D >= 2`,
/// `x >= D`):
/// `(1/B(N/2, 1+D/2)) (N/(N+x))^{N/2} (x/(N+x))^{D/2} 2(2x+ND)/(N(N+2)x)`.
fn ln_dkhi_bound_beta(d: f64, n: f64, x: f64, ln_b: f64) -> f64 {
    LN_2 - ln_b + (2.0 + n * d / x).ln() - (n * (n + 2.0)).ln()
        + 0.5 * n * (n.ln() - (n + x).ln())
        + 0.5 * d * (x.ln() - (n + x).ln())
}

/// ln of the beta-form deep-tail bound on Fish (valid for `D >= 2`,
/// `x >= N/(N-2)`):
/// `(2/B(D/2, N/2)) (N/(N+Dx))^{N/2} (Dx/(N+Dx))^{D/2-1} (2x+N)/N^2`.
fn ln_fish_bound_beta(d: f64, n: f64, x: f64, ln_b: f64) -> f64 {
    LN_2 - ln_b + (2.0 * x + n).ln() - 2.0 * n.ln()
        + 0.5 * n * (n.ln() - (n + d * x).ln())
        + (0.5 * d - 1.0) * ((d * x).ln() - (n + d * x).ln())
}

/// Upper bound on `Dkhi[D, N, x]`: the minimum of the three chained
/// deep-tail bounds (beta form, Fisher-tail form, exponential form), each
/// evaluated in log space. Requires `D >= 2` and `x >= D`.
pub fn dkhi_upper(args: &DkhiArgs) -> Result<f64> {
    args.validate()?;
    if args.d < 2 || args.x < args.d as f64 {
        return Err(Error::Domain(format!(
            "dkhi_upper requires D >= 2 and x >= D, got D = {}, x = {}",
            args.d, args.x
        )));
    }
    let (d, n, x) = (args.d as f64, args.n as f64, args.x);
    let ln_b = ln_beta(n / 2.0, 1.0 + d / 2.0)?;
    let b1 = ln_dkhi_bound_beta(d, n, x, ln_b);
    let factor = (2.0 * x / (n * d)).ln_1p();
    let t = (n + 2.0) * x / (n * d);
    let b2 = factor + fisher_sf_ln(args.d, args.n + 2, t)?;
    let psi = 0.5 * (t - 1.0 - t.ln()) - d * (t - 1.0) * (t - 1.0) / (4.0 * (d + n + 2.0));
    let b3 = factor - d * psi;
    Ok(b1.min(b2).min(b3).exp())
}

/// Upper bound on `Fish[D, N, x]`: minimum of the two deep-tail bounds
/// (beta form and Fisher-tail form). Requires `D >= 2` and
/// `x >= N/(N-2)`.
pub fn fish_upper(args: &FishArgs) -> Result<f64> {
    args.validate()?;
    let (d, n, x) = (args.d as f64, args.n as f64, args.x);
    if args.d < 2 || x < n / (n - 2.0) {
        return Err(Error::Domain(format!(
            "fish_upper requires D >= 2 and x >= N/(N-2), got D = {}, x = {}",
            args.d, args.x
        )));
    }
    let ln_b = ln_beta(d / 2.0, n / 2.0)?;
    let c1 = ln_fish_bound_beta(d, n, x, ln_b);
    let c2 = (2.0 * x / n).ln_1p() + fisher_sf_ln(args.d, args.n, (n - 2.0) * x / n)?;
    Ok(c1.min(c2).exp())
}
