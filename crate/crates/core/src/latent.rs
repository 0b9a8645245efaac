use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An `n x d` row-major table of finite latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSet<T> {
    data: Vec<T>,
    n: usize,
    d: usize,
}

impl<T: Scalar> LatentSet<T> {
    /// Wraps a row-major buffer. `data.len()` must be a multiple of `d`.
    pub fn new(data: Vec<T>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("latent dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "buffer of length {} is not a multiple of dimension {d}",
                data.len()
            )));
        }
        let n = data.len() / d;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { data, n, d })
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::new(Vec::new(), d)
    }

    /// Builds a set from rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let d = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptyLatentSet)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, d)
    }

    /// Caller guarantees the invariants (finite values, `len == n * d`).
    pub(crate) fn from_trusted(data: Vec<T>, d: usize) -> Self {
        debug_assert!(d > 0 && data.len().is_multiple_of(d));
        debug_assert!(data.iter().all(|v| v.is_finite()));
        let n = data.len() / d;
        Self { data, n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self::from_trusted(data, self.d))
    }

    pub fn cast<U: Scalar>(&self) -> LatentSet<U> {
        LatentSet::from_trusted(
            self.data.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
            self.d,
        )
    }
}
