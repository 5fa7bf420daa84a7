//! Floating-point abstraction shared by the numeric modules.
//!
//! Mixture fitting, ellipse extraction, distance fields, morphometric
//! features and the classifier are written against [`Real`] so they can be
//! instantiated for `f32` or `f64`. Exact rational arithmetic is available
//! for metrics that only need field operations (see
//! [`crate::evaluation::metrics`]).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used throughout the numeric core.
pub trait Real:
    'static
    + Copy
    + Send
    + Sync
    + Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Sum
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` literal or measurement into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
