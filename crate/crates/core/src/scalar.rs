//! Scalar abstraction: everything numeric in this crate is generic over
//! [`Real`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for lifting an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}

/// Epsilon added to every pixel before sum-to-1 normalization.
pub fn eps_floor<T: Real>() -> T {
    lit(1e-8)
}

/// Clamp bound for log arguments in the cross-entropy family.
pub fn eps_clamp<T: Real>() -> T {
    lit(1e-7)
}

/// Standard-deviation threshold below which a map counts as constant.
pub fn eps_std<T: Real>() -> T {
    lit(1e-9)
}
