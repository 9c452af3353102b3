//! Minimal 3D vector algebra. One type serves as both point and direction;
//! the distinction never pays for itself at this scale.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn dist_sq(self, o: Self) -> T {
        (self - o).norm_sq()
    }

    /// Unit vector in the same direction, or `None` when too short to
    /// normalize stably.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::of(1e-300) && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Add for Point3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Point3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Point3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Point3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Div<T> for Point3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> AddAssign for Point3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Point3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

/// Interior angle at `apex` in the triangle `(apex, a, b)`, in radians.
/// Clamps the cosine, so degenerate inputs give 0 or pi instead of NaN.
pub fn angle_at<T: Real>(apex: Point3<T>, a: Point3<T>, b: Point3<T>) -> T {
    let u = a - apex;
    let v = b - apex;
    let nu = u.norm();
    let nv = v.norm();
    if nu == T::zero() || nv == T::zero() {
        return T::zero();
    }
    let c = (u.dot(v) / (nu * nv)).max(-T::one()).min(T::one());
    c.acos()
}

/// Twice the triangle area (norm of the cross product of two edges).
pub fn double_area<T: Real>(a: Point3<T>, b: Point3<T>, c: Point3<T>) -> T {
    (b - a).cross(c - a).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Point3<f64>;

    #[test]
    fn cross_follows_right_hand_rule() {
        let x = P::new(1.0, 0.0, 0.0);
        let y = P::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), P::new(0.0, 0.0, 1.0));
        assert_eq!(y.cross(x), P::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn angle_of_right_corner() {
        let apex = P::zero();
        let a = P::new(3.0, 0.0, 0.0);
        let b = P::new(0.0, 5.0, 0.0);
        assert!((angle_at(apex, a, b) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_angle_is_zero_not_nan() {
        let apex = P::zero();
        assert_eq!(angle_at(apex, apex, P::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn area_of_unit_right_triangle() {
        let a = P::zero();
        let b = P::new(1.0, 0.0, 0.0);
        let c = P::new(0.0, 1.0, 0.0);
        assert!((double_area(a, b, c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalized_rejects_null_vector() {
        assert!(P::zero().normalized().is_none());
        let v = P::new(0.0, 3.0, 4.0).normalized().unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
    }
}
