//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (kinematics, stepping, optimization) is generic over
//! [`Real`], so the whole stack instantiates at `f32` or `f64`. The concrete
//! aliases at the crate root pin `f64`, which is what the CLI and the
//! acceptance tolerances use.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the core math runs on: `f32` or `f64`.
///
/// The [`Scalar`](crate::ad::Scalar) supertrait lets every base real also act
/// as the degenerate (derivative-free) case of the differentiation scalar.
pub trait Real:
    RealField
    + Copy
    + Default
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + crate::ad::Scalar<Base = Self>
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for lifting an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal out of range for scalar type")
}

/// `x` is neither NaN nor infinite.
#[inline]
pub fn is_finite<T: Real>(x: T) -> bool {
    // NaN fails the self-comparison; infinities fail the subtraction test.
    x == x && (x - x) == T::zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_classification() {
        assert!(is_finite(1.5f64));
        assert!(is_finite(-0.0f32));
        assert!(!is_finite(f64::NAN));
        assert!(!is_finite(f64::INFINITY));
        assert!(!is_finite(f32::NEG_INFINITY));
    }

    #[test]
    fn literal_cast() {
        let x: f32 = lit(0.25);
        assert_eq!(x, 0.25f32);
    }
}
