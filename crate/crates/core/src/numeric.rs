//! Scalar abstraction for the closed-form and Monte Carlo statistics.
//!
//! Everything in [`crate::analysis`] that produces a real number is written
//! against [`Real`], so the formulas can be evaluated in `f32` or `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// floating point: f32 or f64
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from a count.
    fn of_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }

    fn of_f64(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
