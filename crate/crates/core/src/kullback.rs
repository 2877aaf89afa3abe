//! Kullback divergence between Gaussian laws, the projection bias
//! identity, selection under the Kullback-calibrated criterion, and a
//! Monte Carlo estimator of the Kullback risk of a fixed model.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::collection::{enumerate_models, CollectionSpec, ModelKey, WeightTable};
use crate::error::{Error, Result};
use crate::estimate::{project, Criterion, Design};
use crate::penalty::{PenaltyKind, PenaltyRule};
use crate::rng::{MeanAccumulator, RngStream};
use crate::select::{select_generic, SelectionOutcome};
#[allow(unused_imports)]
use num_traits::Float;

/// A mean vector together with a noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPair {
    pub mu: Vec<f64>,
    pub sigma2: f64,
}

impl ThetaPair {
    pub fn new(mu: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::Domain(format!(
                "variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self { mu, sigma2 })
    }
}

/// Kullback divergence between the Gaussian laws with parameters `theta`
/// and `theta_prime`:
/// `(n/2) [ln(tau^2/sigma^2) + sigma^2/tau^2 - 1 + |mu - nu|^2/(n tau^2)]`.
pub fn kl_div(theta: &ThetaPair, theta_prime: &ThetaPair) -> Result<f64> {
    let n = theta.mu.len();
    if theta_prime.mu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta_prime.mu.len(),
        });
    }
    if !(theta.sigma2 > 0.0) || !(theta_prime.sigma2 > 0.0) {
        return Err(Error::Domain("variances must be positive".into()));
    }
    let (s2, t2) = (theta.sigma2, theta_prime.sigma2);
    let bias: f64 = theta
        .mu
        .iter()
        .zip(&theta_prime.mu)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(n as f64 / 2.0 * ((t2 / s2).ln() + s2 / t2 - 1.0 + bias / (n as f64 * t2)))
}

/// Kullback bias of a model: the divergence from the true law to the best
/// Gaussian law with mean in the model span,
/// `(n/2) ln(1 + |mu - mu_m|^2 / (n sigma^2))`.
pub fn kl_bias(mu: &[f64], sigma2: f64, model: &ModelKey, design: &Design) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    let fit = project(mu, model, design)?;
    let n = mu.len() as f64;
    Ok(n / 2.0 * (fit.rss / (n * sigma2)).ln_1p())
}

/// Selection under the Kullback-calibrated criterion with the EFish-based
/// penalty; returns the outcome together with the fitted `(mean, variance)`
/// pair.
///
/// Refuses when any model dimension exceeds `n - 5`.
pub fn select_kullback(
    y: &[f64],
    spec: &CollectionSpec,
    k1: f64,
    k2: f64,
    weights: &WeightTable,
    design: &Design,
) -> Result<(SelectionOutcome, ThetaPair)> {
    let n = y.len();
    if spec.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: spec.n,
        });
    }
    let models: Vec<ModelKey> = enumerate_models(spec)?.collect();
    for m in &models {
        if m.nominal_dim() + 5 > n {
            return Err(Error::Refused(format!(
                "Kullback selection requires D_m <= n - 5 for all models; {:?} has dimension {}",
                m,
                m.nominal_dim()
            )));
        }
    }
    let rule = PenaltyRule::new(PenaltyKind::Kullback { k1, k2 }, n)?;
    let outcome = select_generic(y, &models, &rule, weights, Criterion::KullbackLog, design)?;
    let theta = ThetaPair {
        mu: outcome.fit.mu_hat.clone(),
        sigma2: outcome.fit.sigma2_hat,
    };
    Ok((outcome, theta))
}

/// Monte Carlo estimate of the Kullback risk `E[K(P_theta, P_theta_hat_m)]`
/// of a fixed model, with its standard error.
pub fn kl_risk_mc(
    mu: &[f64],
    sigma2: f64,
    model: &ModelKey,
    design: &Design,
    reps: u64,
    stream: &RngStream,
) -> Result<(f64, f64)> {
    if reps < 1_000 {
        return Err(Error::Domain(format!(
            "kl_risk_mc requires at least 10^3 replicates, got {reps}"
        )));
    }
    let n = mu.len();
    if model.nominal_dim() + 3 > n {
        return Err(Error::Domain(format!(
            "kl_risk_mc requires N_m > 2, model dimension {} with n = {n}",
            model.nominal_dim()
        )));
    }
    let truth = ThetaPair::new(mu.to_vec(), sigma2)?;
    let sigma = sigma2.sqrt();
    let mut rng = stream.rng();
    let mut acc = MeanAccumulator::new();
    let mut y = alloc::vec![0.0; n];
    for _ in 0..reps {
        for (yi, m) in y.iter_mut().zip(mu) {
            let eps: f64 = rng.sample(StandardNormal);
            *yi = m + sigma * eps;
        }
        let fit = project(&y, model, design)?;
        let theta_hat = ThetaPair {
            mu: fit.mu_hat,
            sigma2: fit.sigma2_hat,
        };
        acc.push(kl_div(&truth, &theta_hat)?);
    }
    Ok((acc.mean(), acc.std_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn kl_div_identities() {
        let theta = ThetaPair::new(vec![1.0, -2.0, 0.5], 1.3).unwrap();
        assert_eq!(kl_div(&theta, &theta).unwrap(), 0.0);
        // theta = (0, 1), theta' = (0, e): (n/2)(1 + 1/e - 1) = n/(2e)
        let n = 7usize;
        let a = ThetaPair::new(vec![0.0; n], 1.0).unwrap();
        let b = ThetaPair::new(vec![0.0; n], core::f64::consts::E).unwrap();
        let expect = n as f64 / (2.0 * core::f64::consts::E);
        assert!((kl_div(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert!(kl_div(&a, &ThetaPair { mu: vec![0.0; n], sigma2: 0.0 }).is_err());
    }

    #[test]
    fn kl_bias_vanishes_inside_model() {
        let mu = [1.0, 1.0, 1.0, 1.0];
        let b = kl_bias(&mu, 2.0, &ModelKey::ChangePoints(vec![]), &Design::none()).unwrap();
        assert!(b.abs() < 1e-15);
    }

    #[test]
    fn kl_bias_matches_divergence_composition() {
        // bias identity: K(theta, theta_m) with theta_m = (mu_m, sigma^2 + |mu-mu_m|^2/n)
        let mu = [2.0, -1.0, 0.5, 3.0, 1.0, -0.5];
        let sigma2 = 0.8;
        let model = ModelKey::CoordSubset(vec![0, 3]);
        let direct = kl_bias(&mu, sigma2, &model, &Design::none()).unwrap();
        let fit = project(&mu, &model, &Design::none()).unwrap();
        let n = mu.len() as f64;
        let theta = ThetaPair::new(mu.to_vec(), sigma2).unwrap();
        let theta_m = ThetaPair::new(fit.mu_hat, sigma2 + fit.rss / n).unwrap();
        let composed = kl_div(&theta, &theta_m).unwrap();
        assert!(
            (direct - composed).abs() <= 1e-10 * direct.max(1.0),
            "{direct} vs {composed}"
        );
    }

    #[test]
    fn kullback_selection_on_single_model() {
        use crate::collection::{Family, WeightScheme};
        let n = 12;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let spec = CollectionSpec::new(
            Family::ChangePointsConst { p: 1 },
            WeightScheme::Canonical,
            n,
            1 << 20,
        )
        .unwrap();
        let weights = WeightTable::for_spec(&spec).unwrap();
        let (out, theta) =
            select_kullback(&y, &spec, 2.0, 3.0, &weights, &Design::none()).unwrap();
        assert_eq!(theta.mu, out.fit.mu_hat);
        assert!(theta.sigma2 > 0.0);
    }

    #[test]
    fn kullback_selection_refuses_big_models() {
        use crate::collection::{Family, WeightScheme};
        let n = 6;
        let y = vec![0.0; n];
        let spec = CollectionSpec::new(
            Family::ChangePointsConst { p: 3 },
            WeightScheme::Canonical,
            n,
            1 << 20,
        )
        .unwrap();
        let weights = WeightTable::for_spec(&spec).unwrap();
        let err = select_kullback(&y, &spec, 2.0, 2.0, &weights, &Design::none()).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }
}
