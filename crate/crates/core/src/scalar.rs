//! Scalar abstraction for the geometric parts of the pipeline.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the rigid-motion and lattice math (f32 or f64).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal fits the scalar type")
    }

    /// Lossy conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `(sin, cos)` of an angle in degrees, exact at multiples of 90°.
    fn sin_cos_deg(deg: Self) -> (Self, Self) {
        let quarter = deg / Self::lit(90.0);
        if quarter == quarter.round() {
            let k = quarter.to_i64().unwrap_or(0).rem_euclid(4);
            let (s, c) = match k {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            };
            return (Self::lit(s), Self::lit(c));
        }
        deg.to_radians().sin_cos()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_deg_signed<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut a = deg % full;
    if a > half {
        a = a - full;
    } else if a <= -half {
        a = a + full;
    }
    a
}

/// Maps an undirected axis angle in degrees into `[0, 180)`.
pub fn wrap_axis_deg<T: Scalar>(deg: T) -> T {
    let half = T::lit(180.0);
    let mut a = deg % half;
    if a < T::zero() {
        a = a + half;
    }
    if a >= half {
        a = a - half;
    }
    a
}

/// Absolute difference of two undirected axes, folded into `[0, 90]` degrees.
pub fn axis_difference_deg<T: Scalar>(a: T, b: T) -> T {
    let d = wrap_axis_deg(a - b);
    d.min(T::lit(180.0) - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_wrap() {
        assert_eq!(wrap_deg_signed(190.0_f64), -170.0);
        assert_eq!(wrap_deg_signed(-180.0_f64), 180.0);
        assert_eq!(wrap_deg_signed(180.0_f64), 180.0);
        assert_eq!(wrap_deg_signed(725.0_f32), 5.0);
    }

    #[test]
    fn axis_fold() {
        assert_eq!(axis_difference_deg(10.0_f64, 170.0), 20.0);
        assert_eq!(axis_difference_deg(0.0_f64, 90.0), 90.0);
        assert_eq!(axis_difference_deg(-5.0_f64, 185.0), 10.0);
        assert_eq!(wrap_axis_deg(-30.0_f64), 150.0);
    }

    #[test]
    fn right_angles_are_exact() {
        assert_eq!(f64::sin_cos_deg(90.0), (1.0, 0.0));
        assert_eq!(f64::sin_cos_deg(-90.0), (-1.0, 0.0));
        assert_eq!(f32::sin_cos_deg(180.0), (0.0, -1.0));
    }
}
