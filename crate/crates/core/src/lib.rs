//! Post-training density estimation and sampling over autoencoder latent spaces.
//!
//! The central sampler, [`PmfsModel`], quantizes latent vectors onto a uniform
//! per-dimension grid, weights each occupied cell by the fraction of vectors
//! it holds, and samples uniformly inside cells picked by weight. A Gaussian
//! mixture fitted by EM ([`GmmModel`]) serves as the baseline, and
//! [`metrics`] holds the distances used to compare them.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the common `f64` instantiations.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod gmm;
pub mod io;
pub mod latent;
pub mod linalg;
pub mod metrics;
pub mod pmfs;
pub mod quantizer;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use gmm::{fit_gmm, init_kmeanspp, log_likelihood, sample_gmm, CovarianceMode, EmConfig, FitReport, GmmFit, GmmModel};
pub use latent::LatentSet;
pub use pmfs::{fit_pmfs, partition_weight, sample_pmfs, sweep_k, FitStats, PmfsModel};
pub use quantizer::{compute_bounds, partition_bounds, quantize_vector, PartitionKey, QuantizationGrid};
pub use scalar::Scalar;

pub type Latents = LatentSet<f64>;
pub type Latents32 = LatentSet<f32>;
pub type Grid = QuantizationGrid<f64>;
pub type Pmfs = PmfsModel<f64>;
pub type Pmfs32 = PmfsModel<f32>;
pub type Gmm = GmmModel<f64>;
pub type Gmm32 = GmmModel<f32>;
pub type Stats = metrics::GaussianStats<f64>;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
