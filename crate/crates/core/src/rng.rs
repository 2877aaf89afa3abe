//! Deterministic, counter-based random number streams.
//!
//! Streams are ChaCha12 generators keyed by a master seed with the 64-bit
//! stream counter selecting the substream. Distinct `(master_seed,
//! stream_index)` pairs give statistically independent sequences; the same
//! pair reproduces the same sequence bit-exactly, independent of how work is
//! scheduled across workers.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// A stream with the same master seed and a different counter.
    pub fn with_index(&self, stream_index: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_index,
        }
    }

    /// Instantiate the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// `count` i.i.d. standard normal draws from the stream.
pub fn sample_gaussian(stream: &RngStream, count: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// `count` i.i.d. central chi-square draws with `df` degrees of freedom.
///
/// Sampled as Gamma(df/2, scale 2), which is exact and much cheaper than
/// summing squared normals for large `df`.
pub fn sample_chisq(stream: &RngStream, df: u32, count: usize) -> Result<Vec<f64>> {
    let gamma = chisq_gamma(df)?;
    let mut rng = stream.rng();
    Ok((0..count).map(|_| gamma.sample(&mut rng)).collect())
}

/// Gamma distribution equal in law to a chi-square with `df` degrees of
/// freedom.
pub(crate) fn chisq_gamma(df: u32) -> Result<Gamma<f64>> {
    if df < 1 {
        return Err(Error::Domain(alloc::format!(
            "chi-square sampling requires df >= 1, got {df}"
        )));
    }
    Gamma::new(df as f64 / 2.0, 2.0)
        .map_err(|_| Error::Domain(alloc::format!("invalid gamma parameters for df {df}")))
}

/// Streaming mean and standard-error accumulator (Welford).
#[derive(Debug, Clone, Default)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (ddof = 1); zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count as f64 - 1.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}
