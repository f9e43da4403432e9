use serde::{Deserialize, Serialize};

use crate::scalar::{wrap_deg_signed, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn distance(self, o: Self) -> T {
        self.sub(o).norm()
    }

    /// Polar angle `atan2(y, x)` in degrees, image coordinates (y down).
    pub fn angle_deg(self) -> T {
        self.y.atan2(self.x).to_degrees()
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl From<(f64, f64)> for Point2<f64> {
    fn from(p: (f64, f64)) -> Self {
        Point2::new(p.0, p.1)
    }
}

/// Rigid motion with the row-vector matrix
/// `[[cos t, -sin t, 0], [sin t, cos t, 0], [dx, dy, 1]]`, i.e. `p' = p * M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform<T> {
    pub dx: T,
    pub dy: T,
    /// Rotation in degrees, normalized to `(-180, 180]`.
    pub dtheta: T,
}

impl<T: Scalar> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> RigidTransform<T> {
    pub fn new(dx: T, dy: T, dtheta_deg: T) -> Self {
        Self {
            dx,
            dy,
            dtheta: wrap_deg_signed(dtheta_deg),
        }
    }

    pub fn identity() -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            dtheta: T::zero(),
        }
    }

    pub fn translation(dx: T, dy: T) -> Self {
        Self::new(dx, dy, T::zero())
    }

    /// Rotation by `deg` that keeps `center` fixed.
    pub fn rotation_about(center: Point2<T>, deg: T) -> Self {
        let r = Self::new(T::zero(), T::zero(), deg);
        let moved = r.apply(center);
        Self::new(center.x - moved.x, center.y - moved.y, deg)
    }

    /// `(dx, dy, dtheta)` with the angle normalized.
    pub fn decompose(&self) -> (T, T, T) {
        (self.dx, self.dy, wrap_deg_signed(self.dtheta))
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        let (s, c) = T::sin_cos_deg(self.dtheta);
        let (z, o) = (T::zero(), T::one());
        [[c, -s, z], [s, c, z], [self.dx, self.dy, o]]
    }

    #[inline]
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        let (s, c) = T::sin_cos_deg(self.dtheta);
        Point2::new(p.x * c + p.y * s + self.dx, -p.x * s + p.y * c + self.dy)
    }

    /// Applies only the rotation part, for direction vectors.
    #[inline]
    pub fn rotate(&self, v: Point2<T>) -> Point2<T> {
        let (s, c) = T::sin_cos_deg(self.dtheta);
        Point2::new(v.x * c + v.y * s, -v.x * s + v.y * c)
    }

    /// Displacement of the point `p` under this motion.
    pub fn displacement_at(&self, p: Point2<T>) -> Point2<T> {
        self.apply(p).sub(p)
    }

    /// `self` followed by `next`: the matrix product `M_self * M_next`.
    pub fn then(&self, next: &Self) -> Self {
        let t = next.rotate(Point2::new(self.dx, self.dy));
        Self::new(t.x + next.dx, t.y + next.dy, self.dtheta + next.dtheta)
    }

    pub fn compose(first: &Self, second: &Self) -> Self {
        first.then(second)
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = Self::new(T::zero(), T::zero(), -self.dtheta);
        let t = inv_rot.rotate(Point2::new(self.dx, self.dy));
        Self::new(-t.x, -t.y, -self.dtheta)
    }

    pub fn cast<U: Scalar>(&self) -> RigidTransform<U> {
        RigidTransform::new(U::lit(self.dx.as_f64()), U::lit(self.dy.as_f64()), U::lit(self.dtheta.as_f64()))
    }
}
