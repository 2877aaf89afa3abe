//! Safeguarded root finding for monotone functions.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const MAX_DOUBLINGS: u32 = 60;
const MAX_REFINE_ITERS: usize = 200;

/// Solve `f(x) = target` for a continuous, strictly decreasing `f` on
/// `[0, inf)`.
///
/// The bracket is found by doubling from `hi_hint`, then refined by
/// bisection with secant acceleration. Returns once
/// `|f(x) - target| <= 1e-12 |target|` or the bracket width falls below
/// `1e-9 (1 + x)`.
pub fn solve_monotone<F>(f: F, target: f64, hi_hint: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(hi_hint > 0.0) {
        return Err(Error::Domain(alloc::format!(
            "solve_monotone requires a positive hi_hint, got {hi_hint}"
        )));
    }
    let f0 = f(0.0);
    if f0 < target {
        return Err(Error::NoSolution {
            target,
            at_zero: f0,
        });
    }
    if f0 == target {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut flo = f0;
    let mut hi = hi_hint;
    let mut fhi = f(hi);
    let mut doublings = 0;
    while fhi > target {
        lo = hi;
        flo = fhi;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Divergence { last_hi: hi });
        }
        hi *= 2.0;
        fhi = f(hi);
    }
    refine_bracket(f, target, lo, flo, hi, fhi)
}

/// Bisection with secant acceleration on an established bracket
/// `f(lo) >= target >= f(hi)` of a decreasing function.
pub(crate) fn refine_bracket<F>(
    f: F,
    target: f64,
    mut lo: f64,
    mut flo: f64,
    mut hi: f64,
    mut fhi: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let ftol = 1e-12 * target.abs();
    for iter in 0..MAX_REFINE_ITERS {
        let mid = 0.5 * (lo + hi);
        // secant step through the bracket endpoints, alternated with
        // bisection so a flat end cannot stall progress
        let x = if iter % 2 == 0 && fhi != flo {
            let xs = lo + (target - flo) * (hi - lo) / (fhi - flo);
            if xs.is_finite() && xs > lo && xs < hi {
                xs
            } else {
                mid
            }
        } else {
            mid
        };
        let fx = f(x);
        if (fx - target).abs() <= ftol && fx.is_finite() {
            return Ok(x);
        }
        if fx > target {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        if hi - lo <= 1e-9 * (1.0 + x.abs()) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(0.5 * (lo + hi))
}
