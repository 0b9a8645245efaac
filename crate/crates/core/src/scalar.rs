//! The floating-point abstraction every numeric routine in the crate is written against.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable for latent coordinates, mixture parameters and metrics.
///
/// Implemented for `f32` and `f64`. File formats always carry binary64, so
/// conversions go through [`Scalar::from_f64`] / [`ToPrimitive::to_f64`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn from_usize_lossy(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("usize is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar always converts to f64")
    }

    fn ln_2pi() -> Self {
        Self::from_f64_lossy((2.0 * std::f64::consts::PI).ln())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
