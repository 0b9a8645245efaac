//! Uniform per-dimension binning of latent vectors.
//!
//! A [`QuantizationGrid`] splits the bounding box of a fitting set into `k`
//! equal-width bins along every axis. A vector's [`PartitionKey`] is the tuple
//! of its bin indices,
//!
//! ```text
//! index_j = floor(k * (z_j - min_j) / (max_j - min_j))
//! ```
//!
//! evaluated in binary64 regardless of the storage scalar, with the value
//! `k` (reached only at `z_j == max_j`) folded into the last bin `k - 1`.
//! A dimension with `max_j == min_j` has zero width and always maps to bin 0.

use crate::error::{Error, Result};
use crate::latent::LatentSet;
use crate::scalar::Scalar;

/// Bin indices of one global partition, one entry per dimension.
///
/// Hashes and compares as the plain tuple of indices; no linearized `k^d`
/// index is ever formed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionKey(Vec<u32>);

impl PartitionKey {
    pub fn new(indices: Vec<u32>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<u32>> for PartitionKey {
    fn from(indices: Vec<u32>) -> Self {
        Self(indices)
    }
}

/// Bin geometry: `k` bins per dimension spanning `[mins[j], maxes[j]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationGrid<T> {
    k: usize,
    mins: Vec<T>,
    maxes: Vec<T>,
    widths: Vec<T>,
}

impl<T: Scalar> QuantizationGrid<T> {
    pub fn new(mins: Vec<T>, maxes: Vec<T>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::NonPositiveK);
        }
        if k > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds the 32-bit bin index range")));
        }
        if mins.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one dimension".into()));
        }
        if mins.len() != maxes.len() {
            return Err(Error::DimensionMismatch {
                expected: mins.len(),
                got: maxes.len(),
            });
        }
        for (j, (lo, hi)) in mins.iter().zip(&maxes).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite { row: 0, col: j });
            }
            if hi < lo {
                return Err(Error::InvalidArgument(format!(
                    "grid dimension {j}: max {hi} is below min {lo}"
                )));
            }
        }
        let kt = T::from_usize_lossy(k);
        let widths = mins.iter().zip(&maxes).map(|(&lo, &hi)| (hi - lo) / kt).collect();
        Ok(Self {
            k,
            mins,
            maxes,
            widths,
        })
    }

    /// Grid spanning the bounding box of `latents`.
    pub fn fit(latents: &LatentSet<T>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::NonPositiveK);
        }
        let (mins, maxes) = compute_bounds(latents)?;
        Self::new(mins, maxes, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[T] {
        &self.mins
    }

    pub fn maxes(&self) -> &[T] {
        &self.maxes
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    /// Bin index of `value` along dimension `j`, which must already be known
    /// to lie inside `[mins[j], maxes[j]]`.
    #[inline]
    pub(crate) fn bin_index(&self, j: usize, value: T) -> u32 {
        let lo = self.mins[j].as_f64();
        let hi = self.maxes[j].as_f64();
        if hi == lo {
            return 0;
        }
        let k = self.k as f64;
        let raw = (k * (value.as_f64() - lo) / (hi - lo)).floor();
        // raw == k only at value == max; the clamp also absorbs the f32->f64
        // round trip for narrow storage types.
        (raw.max(0.0) as usize).min(self.k - 1) as u32
    }

    #[inline]
    pub(crate) fn contains_coord(&self, j: usize, value: T) -> bool {
        value >= self.mins[j] && value <= self.maxes[j]
    }

    /// Whether every coordinate of `z` lies inside the grid's box.
    pub fn contains(&self, z: &[T]) -> bool {
        z.len() == self.dim() && z.iter().enumerate().all(|(j, &v)| self.contains_coord(j, v))
    }

    /// Partition key of `z`; errors if `z` leaves the fitted box.
    pub fn quantize(&self, z: &[T]) -> Result<PartitionKey> {
        self.check_dim(z.len())?;
        let mut indices = Vec::with_capacity(z.len());
        for (j, &v) in z.iter().enumerate() {
            if !self.contains_coord(j, v) {
                return Err(Error::OutsideGrid {
                    dim: j,
                    value: v.as_f64(),
                    min: self.mins[j].as_f64(),
                    max: self.maxes[j].as_f64(),
                });
            }
            indices.push(self.bin_index(j, v));
        }
        Ok(PartitionKey(indices))
    }

    /// Lower and upper corners of the cell addressed by `key`.
    ///
    /// Zero-width dimensions give `lower == upper == mins[j]`. The last bin's
    /// upper edge is reported as `maxes[j]` so cells never poke out of the box.
    pub fn partition_bounds(&self, key: &PartitionKey) -> Result<(Vec<T>, Vec<T>)> {
        self.check_key(key)?;
        let d = self.dim();
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for (j, &idx) in key.indices().iter().enumerate() {
            let (lo, hi) = self.cell_edges(j, idx);
            lower.push(lo);
            upper.push(hi);
        }
        Ok((lower, upper))
    }

    #[inline]
    pub(crate) fn cell_edges(&self, j: usize, idx: u32) -> (T, T) {
        let w = self.widths[j];
        let lo = self.mins[j] + T::from_usize_lossy(idx as usize) * w;
        // Upper edge is the next cell's lower edge, so neighbours share it exactly.
        let hi = if idx as usize + 1 == self.k {
            self.maxes[j]
        } else {
            self.mins[j] + T::from_usize_lossy(idx as usize + 1) * w
        };
        (lo, hi)
    }

    pub fn check_key(&self, key: &PartitionKey) -> Result<()> {
        self.check_dim(key.dim())?;
        if let Some((j, &idx)) = key
            .indices()
            .iter()
            .enumerate()
            .find(|(_, &idx)| idx as usize >= self.k)
        {
            return Err(Error::InvalidArgument(format!(
                "bin index {idx} in dimension {j} is outside [0, {}]",
                self.k - 1
            )));
        }
        Ok(())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Per-dimension minima and maxima over all rows, in one pass.
pub fn compute_bounds<T: Scalar>(latents: &LatentSet<T>) -> Result<(Vec<T>, Vec<T>)> {
    let mut visits = 0;
    compute_bounds_counted(latents, &mut visits)
}

pub(crate) fn compute_bounds_counted<T: Scalar>(
    latents: &LatentSet<T>,
    visits: &mut u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let mut rows = latents.rows();
    let first = rows.next().ok_or(Error::EmptyLatentSet)?;
    let mut mins = first.to_vec();
    let mut maxes = first.to_vec();
    *visits += first.len() as u64;
    for row in rows {
        for ((lo, hi), &v) in mins.iter_mut().zip(maxes.iter_mut()).zip(row) {
            *visits += 1;
            if v < *lo {
                *lo = v;
            }
            if v > *hi {
                *hi = v;
            }
        }
    }
    Ok((mins, maxes))
}

pub fn quantize_vector<T: Scalar>(z: &[T], grid: &QuantizationGrid<T>) -> Result<PartitionKey> {
    grid.quantize(z)
}

pub fn partition_bounds<T: Scalar>(
    key: &PartitionKey,
    grid: &QuantizationGrid<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    grid.partition_bounds(key)
}
