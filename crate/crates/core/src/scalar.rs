//! Floating point abstraction shared by the field, generator and simulation code.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + rustfft::FftNum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from an integer (mode indices, counts).
    fn int(k: i64) -> Self {
        Self::from_i64(k).expect("integer representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Reduce `x` to the fundamental domain `[0, 1)`.
#[inline]
pub fn wrap_unit<T: Real>(x: T) -> T {
    let y = x - x.floor();
    // `x - floor(x)` can round up to exactly 1 for tiny negative x.
    if y >= T::one() {
        T::zero()
    } else {
        y
    }
}
