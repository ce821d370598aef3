//! Planar points, SE(2) poses and segment helpers.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle<T: Scalar>(angle: T) -> T {
    let tau = T::TAU();
    let mut r = angle % tau;
    if r < T::zero() {
        r += tau;
    }
    if r >= tau {
        r -= tau;
    }
    if r > T::PI() {
        r -= tau;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    #[inline]
    pub fn distance_squared(self, other: Self) -> T {
        (self - other).norm_squared()
    }

    /// Linear interpolation, `t = 0` gives `self`.
    #[inline]
    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(U::c(self.x.to_f64_lossy()), U::c(self.y.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Vehicle pose in SE(2). `theta` is kept in `(-pi, pi]` by every
/// constructor and operation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose2<T> {
    #[inline]
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    /// Maps a point from this pose's local frame into the parent frame.
    #[inline]
    pub fn transform_point(&self, local: Point2<T>) -> Point2<T> {
        let (s, c) = self.theta.sin_cos();
        Point2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }

    /// Maps a parent-frame point into this pose's local frame.
    #[inline]
    pub fn inverse_transform_point(&self, world: Point2<T>) -> Point2<T> {
        let (s, c) = self.theta.sin_cos();
        let dx = world.x - self.x;
        let dy = world.y - self.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self ⊕ delta`: applies a motion expressed in this pose's frame.
    pub fn compose(&self, delta: &Pose2<T>) -> Pose2<T> {
        let p = self.transform_point(delta.position());
        Pose2::new(p.x, p.y, self.theta + delta.theta)
    }

    /// `self⁻¹ ⊕ other`: the pose of `other` expressed in this pose's frame.
    pub fn between(&self, other: &Pose2<T>) -> Pose2<T> {
        let p = self.inverse_transform_point(other.position());
        Pose2::new(p.x, p.y, other.theta - self.theta)
    }

    pub fn cast<U: Scalar>(&self) -> Pose2<U> {
        Pose2::new(
            U::c(self.x.to_f64_lossy()),
            U::c(self.y.to_f64_lossy()),
            U::c(self.theta.to_f64_lossy()),
        )
    }
}

/// Closest point on segment `a`-`b` to `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProjection<T> {
    /// Clamped parameter in `[0, 1]`.
    pub t: T,
    pub point: Point2<T>,
    pub distance: T,
}

pub fn project_onto_segment<T: Scalar>(
    p: Point2<T>,
    a: Point2<T>,
    b: Point2<T>,
) -> SegmentProjection<T> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > T::zero() {
        ((p - a).dot(ab) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let point = a + ab * t;
    SegmentProjection {
        t,
        point,
        distance: p.distance(point),
    }
}
