//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the integrators and root finders are written against.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are
/// specified as `f64` literals and converted with [`Real::of`]; at `f32`
/// the tight defaults are not attainable and callers should loosen them.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Lossy conversion used for diagnostics and exact-arithmetic bridges.
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
