//! Points, vectors and axis-aligned boxes.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in meters. Serializes as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn with(mut self, axis: usize, value: f64) -> Vec3 {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            2 => self.z = value,
            _ => panic!("axis {axis} out of range"),
        }
        self
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;

    fn index(&self, axis: usize) -> &f64 {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Axis-aligned box with `min < max` on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a] < self.max[a]) && self.min.is_finite() && self.max.is_finite()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// True when `p` is inside the box shrunk by `eps` on every side.
    pub fn contains_interior(&self, p: Vec3, eps: f64) -> bool {
        (0..3).all(|a| p[a] > self.min[a] + eps && p[a] < self.max[a] - eps)
    }

    /// True when the segment `a`–`b` passes through the box interior shrunk
    /// by `eps`. Segments that only touch the surface do not count.
    pub fn segment_hits_interior(&self, a: Vec3, b: Vec3, eps: f64) -> bool {
        let d = b - a;
        let mut t_enter = 0.0_f64;
        let mut t_exit = 1.0_f64;
        for axis in 0..3 {
            let lo = self.min[axis] + eps;
            let hi = self.max[axis] - eps;
            if d[axis].abs() < 1e-300 {
                if a[axis] <= lo || a[axis] >= hi {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / d[axis];
            let (mut t0, mut t1) = ((lo - a[axis]) * inv, (hi - a[axis]) * inv);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter >= t_exit {
                return false;
            }
        }
        t_enter < t_exit
    }

    /// The six faces, ordered -x, +x, -y, +y, -z, +z.
    pub fn faces(&self) -> [Face; 6] {
        std::array::from_fn(|i| self.face(i))
    }

    pub fn face(&self, index: usize) -> Face {
        let axis = index / 2;
        let outward = index % 2 == 1;
        let (u, v) = Face::tangent_axes(axis);
        Face {
            index,
            axis,
            sign: if outward { 1.0 } else { -1.0 },
            coord: if outward { self.max[axis] } else { self.min[axis] },
            lo: [self.min[u], self.min[v]],
            hi: [self.max[u], self.max[v]],
        }
    }
}

/// One rectangular face of an [`Aabb`], lying in the plane
/// `p[axis] == coord` with outward normal `sign` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub index: usize,
    pub axis: usize,
    pub sign: f64,
    pub coord: f64,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Face {
    fn tangent_axes(axis: usize) -> (usize, usize) {
        match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::ZERO.with(self.axis, self.sign)
    }

    pub fn center(&self) -> Vec3 {
        let (u, v) = Face::tangent_axes(self.axis);
        Vec3::ZERO
            .with(self.axis, self.coord)
            .with(u, 0.5 * (self.lo[0] + self.hi[0]))
            .with(v, 0.5 * (self.lo[1] + self.hi[1]))
    }

    /// Positive on the outward side of the face plane.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.sign * (p[self.axis] - self.coord)
    }

    pub fn mirror(&self, p: Vec3) -> Vec3 {
        p.with(self.axis, 2.0 * self.coord - p[self.axis])
    }

    /// Whether a point already on the face plane lies within the rectangle,
    /// edges included up to `tol`.
    pub fn contains_planar(&self, p: Vec3, tol: f64) -> bool {
        let (u, v) = Face::tangent_axes(self.axis);
        p[u] >= self.lo[0] - tol
            && p[u] <= self.hi[0] + tol
            && p[v] >= self.lo[1] - tol
            && p[v] <= self.hi[1] + tol
    }

    /// Point where segment `a`–`b` crosses the face plane, if it crosses
    /// strictly between its endpoints.
    pub fn cross_plane(&self, a: Vec3, b: Vec3) -> Option<Vec3> {
        let da = a[self.axis] - self.coord;
        let db = b[self.axis] - self.coord;
        if da * db >= 0.0 {
            return None;
        }
        let t = da / (da - db);
        let p = a + (b - a) * t;
        Some(p.with(self.axis, self.coord))
    }
}
