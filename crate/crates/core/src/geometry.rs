//! Pixel-space vectors and axis-aligned boxes.
//!
//! Image frame convention: origin top-left, x to the right, y down. Boxes are
//! stored center + size; corner form is derived on demand.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A 2-vector of pixels. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance_squared(self, other: Vec2) -> f64 {
        (self - other).norm_squared()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation; `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        if t >= 1.0 {
            return other;
        }
        Vec2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned bounding box, center + size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    #[serde(rename = "pos")]
    pub center: Vec2,
    pub size: Vec2,
}

impl BBox {
    pub const fn new(center: Vec2, size: Vec2) -> Self {
        Self { center, size }
    }

    /// Builds a box from its top-left and bottom-right corners.
    pub fn from_corners(min: Vec2, max: Vec2) -> Self {
        Self {
            center: Vec2::new((min.x + max.x) / 2.0, (min.y + max.y) / 2.0),
            size: Vec2::new(max.x - min.x, max.y - min.y),
        }
    }

    pub fn min(&self) -> Vec2 {
        Vec2::new(
            self.center.x - self.size.x / 2.0,
            self.center.y - self.size.y / 2.0,
        )
    }

    pub fn max(&self) -> Vec2 {
        Vec2::new(
            self.center.x + self.size.x / 2.0,
            self.center.y + self.size.y / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.size.x * self.size.y
    }

    /// Area of the intersection; zero for disjoint or edge-touching boxes.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        match self.intersection(other) {
            Some(b) => b.area(),
            None => 0.0,
        }
    }

    /// Intersection box when it has positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let (a0, a1) = (self.min(), self.max());
        let (b0, b1) = (other.min(), other.max());
        let lo = Vec2::new(a0.x.max(b0.x), a0.y.max(b0.y));
        let hi = Vec2::new(a1.x.min(b1.x), a1.y.min(b1.y));
        (hi.x > lo.x && hi.y > lo.y).then(|| BBox::from_corners(lo, hi))
    }

    /// Positive-area overlap. Touching edges do not count.
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.intersection(other).is_some()
    }

    /// True when `other` lies entirely inside `self` (closed boxes).
    pub fn contains_box(&self, other: &BBox) -> bool {
        let (a0, a1) = (self.min(), self.max());
        let (b0, b1) = (other.min(), other.max());
        b0.x >= a0.x && b0.y >= a0.y && b1.x <= a1.x && b1.y <= a1.y
    }

    pub fn translated(&self, by: Vec2) -> BBox {
        BBox::new(self.center + by, self.size)
    }
}

/// Area of `target` covered by the union of `covers`.
///
/// Exact for axis-aligned boxes via coordinate compression; intended for the
/// handful of boxes in one scene.
pub fn covered_area(target: &BBox, covers: &[BBox]) -> f64 {
    let clipped: Vec<BBox> = covers
        .iter()
        .filter_map(|c| target.intersection(c))
        .collect();
    if clipped.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = clipped.iter().flat_map(|b| [b.min().x, b.max().x]).collect();
    let mut ys: Vec<f64> = clipped.iter().flat_map(|b| [b.min().y, b.max().y]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    let mut area = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let mid = Vec2::new((xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0);
            let inside = clipped.iter().any(|b| {
                let (lo, hi) = (b.min(), b.max());
                mid.x > lo.x && mid.x < hi.x && mid.y > lo.y && mid.y < hi.y
            });
            if inside {
                area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    area
}
