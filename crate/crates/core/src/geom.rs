//! Minimal planar geometry: 2D points, small fixed-size matrices and SE(2).

use crate::scalar::{wrap_angle, Real};
use std::ops::{Add, Mul, Neg, Sub};

/// A 2D point or vector in metric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product, `self x o`.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    pub fn rotation(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self { m: [[c, -s], [s, c]] }
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(
            self.m[0][0] * p.x + self.m[0][1] * p.y,
            self.m[1][0] * p.x + self.m[1][1] * p.y,
        )
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]],
        }
    }
}

/// 3-vector used for homogeneous coordinates and pose-graph residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<T> {
    pub v: [T; 3],
}

impl<T: Real> Vec3<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { v: [a, b, c] }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.v[0] + o.v[0], self.v[1] + o.v[1], self.v[2] + o.v[2])
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.v[0] - o.v[0], self.v[1] - o.v[1], self.v[2] - o.v[2])
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.v[0] * s, self.v[1] * s, self.v[2] * s)
    }

    pub fn dot(self, o: Self) -> T {
        self.v[0] * o.v[0] + self.v[1] * o.v[1] + self.v[2] * o.v[2]
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }
}

/// 3x3 matrix, row major. Used for the BEV projection chain and for the
/// 3x3 information/Hessian blocks of the pose graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn zero() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            r.m[i][i] = T::one();
        }
        r
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let mut r = Self::zero();
        r.m[0][0] = a;
        r.m[1][1] = b;
        r.m[2][2] = c;
        r
    }

    pub fn from_rows(r0: [T; 3], r1: [T; 3], r2: [T; 3]) -> Self {
        Self { m: [r0, r1, r2] }
    }

    pub fn transpose(&self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[j][i];
            }
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    s = s + self.m[i][k] * o.m[k][j];
                }
                r.m[i][j] = s;
            }
        }
        r
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let mut r = Vec3::zero();
        for i in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s = s + self.m[i][k] * v.v[k];
            }
            r.v[i] = s;
        }
        r
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[i][j] + o.m[i][j];
            }
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[i][j] - o.m[i][j];
            }
        }
        r
    }

    pub fn scale(&self, s: T) -> Self {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = r.m[i][j] * s;
            }
        }
        r
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by cofactor expansion; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det.abs() < T::of(1e-300) || !det.is_finite() {
            return None;
        }
        let m = &self.m;
        let inv_det = T::one() / det;
        let mut r = Self::zero();
        r.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
        r.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
        r.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
        r.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
        r.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
        r.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
        r.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
        r.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
        r.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        Some(r)
    }

    /// Lower-triangular Cholesky factor of a symmetric positive-definite
    /// matrix; `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let mut l = Self::zero();
        for i in 0..3 {
            for j in 0..=i {
                let mut s = self.m[i][j];
                for k in 0..j {
                    s = s - l.m[i][k] * l.m[j][k];
                }
                if i == j {
                    if s <= T::zero() || !s.is_finite() {
                        return None;
                    }
                    l.m[i][j] = s.sqrt();
                } else {
                    l.m[i][j] = s / l.m[j][j];
                }
            }
        }
        Some(l)
    }

    /// Solve `L x = b` for lower-triangular `L` (this matrix).
    pub fn solve_lower(&self, b: Vec3<T>) -> Vec3<T> {
        let l = &self.m;
        let mut x = Vec3::zero();
        x.v[0] = b.v[0] / l[0][0];
        x.v[1] = (b.v[1] - l[1][0] * x.v[0]) / l[1][1];
        x.v[2] = (b.v[2] - l[2][0] * x.v[0] - l[2][1] * x.v[1]) / l[2][2];
        x
    }

    /// Solve `L^T x = b` for lower-triangular `L` (this matrix).
    pub fn solve_lower_transpose(&self, b: Vec3<T>) -> Vec3<T> {
        let l = &self.m;
        let mut x = Vec3::zero();
        x.v[2] = b.v[2] / l[2][2];
        x.v[1] = (b.v[1] - l[2][1] * x.v[2]) / l[1][1];
        x.v[0] = (b.v[0] - l[1][0] * x.v[1] - l[2][0] * x.v[2]) / l[0][0];
        x
    }

    /// Symmetric positive-definite check via Cholesky.
    pub fn is_spd(&self) -> bool {
        let sym = (0..3).all(|i| (0..3).all(|j| (self.m[i][j] - self.m[j][i]).abs() < T::of(1e-9)));
        sym && self.cholesky().is_some()
    }
}

/// A planar rigid transform: rotation by `yaw` followed by translation.
///
/// Composition follows the usual convention `a.compose(b)` = "first apply
/// `b` in `a`'s frame", i.e. homogeneous `A * B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2<T> {
    pub t: Point2<T>,
    pub yaw: T,
}

impl<T: Real> Se2<T> {
    pub fn new(x: T, y: T, yaw: T) -> Self {
        Self {
            t: Point2::new(x, y),
            yaw: wrap_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn rotation(&self) -> Mat2<T> {
        Mat2::rotation(self.yaw)
    }

    /// Transform a point from this frame into the parent frame.
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        self.rotation().apply(p) + self.t
    }

    pub fn compose(&self, o: &Self) -> Self {
        let t = self.apply(o.t);
        Self {
            t,
            yaw: wrap_angle(self.yaw + o.yaw),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        let t = rt.apply(-self.t);
        Self {
            t,
            yaw: wrap_angle(-self.yaw),
        }
    }

    /// Relative transform taking this frame to `o`: `self^-1 * o`.
    pub fn between(&self, o: &Self) -> Self {
        self.inverse().compose(o)
    }

    /// Coordinates `(x, y, yaw)` as a 3-vector.
    pub fn params(&self) -> Vec3<T> {
        Vec3::new(self.t.x, self.t.y, self.yaw)
    }

    pub fn from_params(v: Vec3<T>) -> Self {
        Self::new(v.v[0], v.v[1], v.v[2])
    }

    /// Homogeneous 3x3 matrix form.
    pub fn matrix(&self) -> Mat3<T> {
        let (s, c) = self.yaw.sin_cos();
        Mat3::from_rows(
            [c, -s, self.t.x],
            [s, c, self.t.y],
            [T::zero(), T::zero(), T::one()],
        )
    }
}
