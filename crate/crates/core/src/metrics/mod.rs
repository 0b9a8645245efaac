//! Evaluation metrics for comparing latent sets and discrete distributions.

mod gaussian;
mod pca;
mod sinkhorn;

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub use gaussian::{frechet_gaussian_distance, gaussian_stats, matrix_sqrt_psd, GaussianStats};
pub use pca::{pca_project, Pca};
pub use sinkhorn::{sinkhorn_distance, wasserstein_1d_exact, Epsilon, SinkhornConfig};

/// `1/2 * sum |p(x) - q(x)|` over the union of both supports.
///
/// Each map must sum to one within `1e-9`.
pub fn total_variation<K: Hash + Eq>(p: &HashMap<K, f64>, q: &HashMap<K, f64>) -> Result<f64> {
    for dist in [p, q] {
        let total: f64 = dist.values().sum();
        if (total - 1.0).abs() > 1e-9 || dist.values().any(|v| !(*v >= 0.0)) {
            return Err(Error::NotNormalized(total));
        }
    }
    let mut l1 = 0.0;
    for (key, &pv) in p {
        l1 += (pv - q.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &qv) in q {
        if !p.contains_key(key) {
            l1 += qv;
        }
    }
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

/// Normalized histogram of `keys`.
pub fn empirical_distribution<K: Hash + Eq, I: IntoIterator<Item = K>>(keys: I) -> HashMap<K, f64> {
    let mut counts: HashMap<K, u64> = HashMap::new();
    let mut n = 0u64;
    for k in keys {
        *counts.entry(k).or_insert(0) += 1;
        n += 1;
    }
    counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}
