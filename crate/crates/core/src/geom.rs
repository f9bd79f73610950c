//! Small planar-geometry helpers used by both the solver and the simulator.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point in the plane. Serializes as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Euclidean distance to another point.
    pub fn dist(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from(t: (f64, f64)) -> Self {
        Point2 { x: t.0, y: t.1 }
    }
}

impl From<Point2> for (f64, f64) {
    fn from(p: Point2) -> Self {
        (p.x, p.y)
    }
}

/// Wraps an angle into the half-open interval `(-pi, pi]`.
///
/// The upper end is the closed one, so `wrap_angle(PI) == PI` and
/// `wrap_angle(-PI) == PI`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI); // [0, 2*pi)
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}
