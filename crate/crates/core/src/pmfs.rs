//! Probability-mass-function sampling over a quantized latent space.
//!
//! Fitting bins every latent vector with a [`QuantizationGrid`] and counts how
//! many vectors land in each occupied global partition; the weight of a
//! partition is `count / n`. Only occupied partitions are stored, so memory is
//! bounded by `min(n, k^d)` entries no matter how large `k^d` gets.
//!
//! Sampling picks a stored partition with probability equal to its weight and
//! then draws each coordinate uniformly inside that partition's cell. Every
//! sample therefore lands in a cell that contains at least one fitting vector.

use std::collections::HashMap;

use rustc_hash::FxHashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::latent::LatentSet;
use crate::metrics::{sinkhorn_distance, SinkhornConfig};
use crate::quantizer::{compute_bounds_counted, PartitionKey, QuantizationGrid};
use crate::rng;
use crate::scalar::Scalar;

/// Uniform redraws of a coordinate before falling back to a bisection search.
const MAX_COORD_REDRAWS: usize = 16;

/// A fitted sampler: the grid plus the occupied partitions and their counts.
#[derive(Debug, Clone)]
pub struct PmfsModel<T> {
    grid: QuantizationGrid<T>,
    /// Occupied keys in lexicographic order, so sampling does not depend on
    /// hash iteration order or on the order of the fitting rows.
    keys: Vec<PartitionKey>,
    counts: Vec<u64>,
    /// `cumulative[i] = counts[0] + ... + counts[i]`; the last entry equals `n`.
    cumulative: Vec<u64>,
    lookup: FxHashMap<PartitionKey, usize>,
    n: u64,
}

/// Instrumentation gathered while fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitStats {
    /// Latent coordinates read across the bounds pass and the binning pass.
    pub element_visits: u64,
}

impl<T: Scalar> PmfsModel<T> {
    /// Fits a model with `k` bins per dimension.
    pub fn fit(latents: &LatentSet<T>, k: usize) -> Result<Self> {
        Self::fit_with_stats(latents, k).map(|(model, _)| model)
    }

    pub fn fit_with_stats(latents: &LatentSet<T>, k: usize) -> Result<(Self, FitStats)> {
        if k == 0 {
            return Err(Error::NonPositiveK);
        }
        let mut visits = 0u64;
        let (mins, maxes) = compute_bounds_counted(latents, &mut visits)?;
        let grid = QuantizationGrid::new(mins, maxes, k)?;

        let d = grid.dim();
        let mut counts: FxHashMap<PartitionKey, u64> = FxHashMap::default();
        for row in latents.rows() {
            let mut indices = Vec::with_capacity(d);
            for (j, &v) in row.iter().enumerate() {
                visits += 1;
                indices.push(grid.bin_index(j, v));
            }
            *counts.entry(PartitionKey::new(indices)).or_insert(0) += 1;
        }

        let model = Self::assemble(grid, counts.into_iter().collect(), latents.len() as u64);
        Ok((model, FitStats { element_visits: visits }))
    }

    /// Rebuilds a model from persisted `(key, count)` pairs, validating every
    /// invariant a fitted model satisfies.
    pub fn from_counts(
        grid: QuantizationGrid<T>,
        entries: Vec<(PartitionKey, u64)>,
        n: u64,
    ) -> Result<Self> {
        if n == 0 || entries.is_empty() {
            return Err(Error::EmptyLatentSet);
        }
        let mut total = 0u64;
        for (key, count) in &entries {
            grid.check_key(key)?;
            if *count == 0 {
                return Err(Error::InvalidArgument("partition with zero count".into()));
            }
            total = total
                .checked_add(*count)
                .ok_or_else(|| Error::InvalidArgument("partition counts overflow".into()))?;
        }
        if total != n {
            return Err(Error::InvalidArgument(format!(
                "partition counts sum to {total}, expected n = {n}"
            )));
        }
        let model = Self::assemble(grid, entries, n);
        if model.keys.len() != model.lookup.len() {
            return Err(Error::InvalidArgument("duplicate partition key".into()));
        }
        Ok(model)
    }

    fn assemble(grid: QuantizationGrid<T>, mut entries: Vec<(PartitionKey, u64)>, n: u64) -> Self {
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut keys = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut lookup = FxHashMap::with_capacity_and_hasher(entries.len(), Default::default());
        let mut running = 0u64;
        for (i, (key, count)) in entries.into_iter().enumerate() {
            running += count;
            lookup.insert(key.clone(), i);
            keys.push(key);
            counts.push(count);
            cumulative.push(running);
        }
        Self {
            grid,
            keys,
            counts,
            cumulative,
            lookup,
            n,
        }
    }

    pub fn grid(&self) -> &QuantizationGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Size of the fitting set.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn num_partitions(&self) -> usize {
        self.keys.len()
    }

    /// Occupied partitions with their counts, in key order.
    pub fn counts(&self) -> impl ExactSizeIterator<Item = (&PartitionKey, u64)> + '_ {
        self.keys.iter().zip(self.counts.iter().copied())
    }

    /// Occupied partitions with their probabilities, in key order.
    pub fn weights(&self) -> impl ExactSizeIterator<Item = (&PartitionKey, f64)> + '_ {
        let n = self.n as f64;
        self.counts().map(move |(k, c)| (k, c as f64 / n))
    }

    pub fn weights_map(&self) -> HashMap<PartitionKey, f64> {
        self.weights().map(|(k, w)| (k.clone(), w)).collect()
    }

    /// Probability of partition `key`; zero when nothing was binned there.
    pub fn partition_weight(&self, key: &PartitionKey) -> Result<f64> {
        if key.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: key.dim(),
            });
        }
        Ok(self
            .lookup
            .get(key)
            .map_or(0.0, |&i| self.counts[i] as f64 / self.n as f64))
    }

    /// Whether `z` falls inside the box and into an occupied partition.
    pub fn in_support(&self, z: &[T]) -> bool {
        match self.grid.quantize(z) {
            Ok(key) => self.lookup.contains_key(&key),
            Err(_) => false,
        }
    }

    /// Draws `count` vectors. Output is a pure function of `(self, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> LatentSet<T> {
        let d = self.dim();
        let mut rng = rng::seeded(seed);
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            let r = rng.random_range(0..self.n);
            let slot = self.cumulative.partition_point(|&c| c <= r);
            let key = &self.keys[slot];
            for (j, &idx) in key.indices().iter().enumerate() {
                data.push(self.draw_coordinate(&mut rng, j, idx));
            }
        }
        LatentSet::from_trusted(data, d)
    }

    fn draw_coordinate<R: Rng>(&self, rng: &mut R, j: usize, idx: u32) -> T {
        let (lo, hi) = self.grid.cell_edges(j, idx);
        if hi <= lo {
            return lo;
        }
        for _ in 0..MAX_COORD_REDRAWS {
            let u = T::from_f64_lossy(rng.random::<f64>());
            let z = lo + u * (hi - lo);
            // The closed-form bin index and the accumulated cell edges can
            // disagree within an ulp of an edge; redraw instead of leaking
            // into a neighbouring (possibly empty) cell.
            if self.grid.contains_coord(j, z) && self.grid.bin_index(j, z) == idx {
                return z;
            }
        }
        first_value_in_bin(&self.grid, j, idx)
    }
}

/// Smallest representable coordinate along `j` whose bin index is at least
/// `target`. For an occupied bin this value lies in that bin, since the bin
/// index is monotone and some fitting value maps to `target`.
pub(crate) fn first_value_in_bin<T: Scalar>(grid: &QuantizationGrid<T>, j: usize, target: u32) -> T {
    let mut lo = grid.mins()[j];
    let mut hi = grid.maxes()[j];
    if grid.bin_index(j, lo) >= target {
        return lo;
    }
    let two = T::one() + T::one();
    loop {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            return hi;
        }
        if grid.bin_index(j, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

pub fn fit_pmfs<T: Scalar>(latents: &LatentSet<T>, k: usize) -> Result<PmfsModel<T>> {
    PmfsModel::fit(latents, k)
}

pub fn sample_pmfs<T: Scalar>(model: &PmfsModel<T>, count: usize, seed: u64) -> LatentSet<T> {
    model.sample(count, seed)
}

pub fn partition_weight<T: Scalar>(model: &PmfsModel<T>, key: &PartitionKey) -> Result<f64> {
    model.partition_weight(key)
}

/// For each `k`, fits on `train`, draws `sample_count` vectors with `seed` and
/// measures their Sinkhorn distance to `holdout`. Results follow input order.
pub fn sweep_k<T: Scalar>(
    train: &LatentSet<T>,
    holdout: &LatentSet<T>,
    k_values: &[usize],
    sample_count: usize,
    seed: u64,
) -> Result<Vec<(usize, Result<T>)>> {
    sweep_k_with(train, holdout, k_values, sample_count, seed, &SinkhornConfig::default())
}

pub fn sweep_k_with<T: Scalar>(
    train: &LatentSet<T>,
    holdout: &LatentSet<T>,
    k_values: &[usize],
    sample_count: usize,
    seed: u64,
    config: &SinkhornConfig,
) -> Result<Vec<(usize, Result<T>)>> {
    if train.is_empty() || holdout.is_empty() {
        return Err(Error::EmptyLatentSet);
    }
    if train.dim() != holdout.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: holdout.dim(),
        });
    }
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    Ok(k_values
        .iter()
        .map(|&k| {
            let distance = PmfsModel::fit(train, k)
                .and_then(|model| sinkhorn_distance(&model.sample(sample_count, seed), holdout, config));
            (k, distance)
        })
        .collect())
}
