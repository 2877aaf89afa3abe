//! Penalized least-squares model selection for Gaussian observations with
//! unknown variance.
//!
//! The crate provides the data-driven penalties built from inverse tail
//! functionals of chi-square and Fisher statistics, the classical criteria
//! (FPE, AIC, BIC, AMDL) for comparison, model collections for nonzero-mean
//! detection, variable selection, change-point detection and piecewise
//! polynomial regression, and the selectors that minimize the penalized
//! criteria over those collections.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature
//! (default) only toggles the standard library in dependencies.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod collection;
pub mod error;
pub mod estimate;
pub mod kullback;
pub mod penalty;
pub mod rng;
pub mod root;
pub mod select;
pub mod special;
pub mod tail;

pub use error::{Error, Result};
