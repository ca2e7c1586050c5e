//! Floating point abstraction shared by the tabular solvers and the networks.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

/// A real scalar the solvers and networks can be instantiated with.
///
/// Implemented for `f32` and `f64`. Game data (payoffs, chance weights,
/// beliefs) is always stored as `f64` and converted on use.
pub trait Scalar:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn c(value: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn c(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn c(value: f64) -> Self {
        value
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
