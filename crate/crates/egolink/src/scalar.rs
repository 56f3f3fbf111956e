//! Scalar abstraction for the numeric core.
//!
//! Geodesy, similarity and metric code is generic over [`Float`] so it can
//! run in `f32` or `f64`. The crate root re-exports `f64` aliases for the
//! domain types; the pipeline uses those.

use std::fmt::Debug;

use num_traits::{Float as NumFloat, FloatConst, NumAssign, NumCast};

/// Floating point scalar usable by the numeric core (`f32`, `f64`).
pub trait Float:
    NumFloat + FloatConst + NumAssign + NumCast + Copy + Debug + PartialOrd + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 converts to any Float")
    }

    fn to_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("Float converts to f64")
    }

    fn from_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("usize converts to Float")
    }
}

impl Float for f32 {}
impl Float for f64 {}
