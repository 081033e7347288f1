//! Planar vectors and the toroidal world.

use std::f32::consts::TAU;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f32,
    pub y: f32,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f32, y: f32) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing at `angle` radians from the +x axis.
    #[inline]
    pub fn from_angle(angle: f32) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f32 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn length_squared(self) -> f32 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f32 {
        self.length_squared().sqrt()
    }

    /// Rotation about the origin by `angle` radians, counter-clockwise.
    #[inline]
    pub fn rotated(self, angle: f32) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f32> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: f32) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Torus,
}

/// Rectangular world extent. Opposite edges are identified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub width: f32,
    pub height: f32,
    #[serde(default)]
    pub topology: Topology,
}

impl WorldSpec {
    pub fn new(width: f32, height: f32) -> Self {
        Self {
            width,
            height,
            topology: Topology::Torus,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.width.is_finite() && self.height.is_finite() && self.width > 0.0 && self.height > 0.0
    }

    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x < self.width && p.y >= 0.0 && p.y < self.height
    }

    /// Maps any finite point back into `[0, width) x [0, height)`.
    #[inline]
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        Vec2::new(wrap_coord(p.x, self.width), wrap_coord(p.y, self.height))
    }

    /// Minimal-image displacement from `a` to `b`.
    #[inline]
    pub fn displacement(&self, a: Vec2, b: Vec2) -> Vec2 {
        Vec2::new(
            minimal_image(b.x - a.x, self.width),
            minimal_image(b.y - a.y, self.height),
        )
    }

    #[inline]
    pub fn distance(&self, a: Vec2, b: Vec2) -> f32 {
        self.displacement(a, b).length()
    }

    pub fn area(&self) -> f32 {
        self.width * self.height
    }
}

/// Shortest vector `d` with `a + d == b` modulo the world extent.
pub fn torus_displacement(a: Vec2, b: Vec2, world: &WorldSpec) -> Vec2 {
    world.displacement(a, b)
}

#[inline]
fn minimal_image(delta: f32, extent: f32) -> f32 {
    let half = 0.5 * extent;
    if delta > half {
        delta - extent
    } else if delta < -half {
        delta + extent
    } else {
        delta
    }
}

#[inline]
pub(crate) fn wrap_coord(v: f32, extent: f32) -> f32 {
    if (0.0..extent).contains(&v) {
        return v;
    }
    let r = v.rem_euclid(extent);
    // rem_euclid can round up to `extent` for tiny negative inputs.
    if r >= extent {
        0.0
    } else {
        r
    }
}

/// Heading folded into `[0, 2pi)`.
#[inline]
pub fn normalize_angle(theta: f32) -> f32 {
    wrap_coord(theta, TAU)
}

/// Angle folded into `[-pi, pi)`.
#[inline]
pub fn wrap_to_pi(theta: f32) -> f32 {
    use std::f32::consts::PI;
    normalize_angle(theta + PI) - PI
}
