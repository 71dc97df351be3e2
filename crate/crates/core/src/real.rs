//! Scalar abstraction so the same layer code runs in f32 (training) and
//! f64 (gradient checking).

use ndarray::{LinalgScalar, ScalarOperand};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable throughout the numeric stack.
pub trait Real:
    num_traits::Float
    + num_traits::NumAssign
    + LinalgScalar
    + ScalarOperand
    + PartialOrd
    + Display
    + Debug
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64; every constant in the crate goes through
    /// this so f32 and f64 instantiations share one code path.
    fn of(x: f64) -> Self;

    /// Widen to f64 for reporting and tolerance checks.
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}
