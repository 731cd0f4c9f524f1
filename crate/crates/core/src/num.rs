//! Scalar abstraction.
//!
//! All simulation, learning, and planning code in this crate is generic over
//! a floating-point scalar so the same pipeline can run in `f32` or `f64`.
//! Concrete aliases for the common instantiations live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
///
/// Implemented by `f32` and `f64` via the blanket impl below; anything that
/// satisfies the listed `num_traits` bounds gets it for free.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable, which cannot happen for
    /// finite constants in `f32`/`f64`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }

    /// Lossy view as `f64`, used for formatting and cross-type checks.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real scalar must convert to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Display
        + Debug
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Wraps an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle<R: Real>(angle: R) -> R {
    let pi = R::PI();
    let two_pi = pi + pi;
    if !angle.is_finite() {
        return angle;
    }
    let mut a = angle % two_pi;
    if a <= -pi {
        a += two_pi;
    } else if a > pi {
        a -= two_pi;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_covers_boundaries() {
        let pi = std::f64::consts::PI;
        assert_eq!(wrap_angle(pi), pi);
        assert_eq!(wrap_angle(-pi), pi);
        assert!((wrap_angle(3.0 * pi) - pi).abs() < 1e-12);
        assert!((wrap_angle(-2.5 * pi) - (-0.5 * pi)).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25f32), 0.25f32);
    }

    #[test]
    fn scalar_conversions_round_trip() {
        let x: f32 = Real::of(0.4);
        assert_eq!(x, 0.4f32);
        let y: f64 = Real::of(1.48);
        assert_eq!(y, 1.48f64);
        assert_eq!(y.as_f64(), 1.48f64);
    }
}
