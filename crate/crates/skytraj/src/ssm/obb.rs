//! Oriented bounding boxes and exact rectangle overlap via separating axes.

use geo::{Coord, LineString, Polygon};
use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::model::OrientedBoxState;

/// An oriented rectangle: center, full length along the yaw axis, full width
/// across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Point2<f64>,
    pub length: f64,
    pub width: f64,
    pub yaw_rad: f64,
}

impl Obb {
    pub fn new(center: Point2<f64>, length: f64, width: f64, yaw_rad: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0 && length.is_finite() && width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box dimensions must be positive and finite (length {length}, width {width})"
            )));
        }
        if !center.x.is_finite() || !center.y.is_finite() || !yaw_rad.is_finite() {
            return Err(Error::NonFinite { context: "oriented box pose".into() });
        }
        Ok(Obb { center, length, width, yaw_rad })
    }

    pub fn from_state(s: &OrientedBoxState) -> Result<Self> {
        Obb::new(s.center, s.length, s.width, s.yaw_rad)
    }

    /// Unit axes: along the length, and along the width.
    pub fn axes(&self) -> [Vector2<f64>; 2] {
        let (sy, cy) = self.yaw_rad.sin_cos();
        [Vector2::new(cy, sy), Vector2::new(-sy, cy)]
    }

    /// Corners in counter-clockwise order starting at (+length, +width).
    pub fn corners(&self) -> [Point2<f64>; 4] {
        let [u, v] = self.axes();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [
            self.center + u * hl + v * hw,
            self.center - u * hl + v * hw,
            self.center - u * hl - v * hw,
            self.center + u * hl - v * hw,
        ]
    }

    /// Closed polygon for set operations.
    pub fn to_polygon(&self) -> Polygon<f64> {
        let ring: Vec<Coord<f64>> = self
            .corners()
            .iter()
            .map(|p| Coord { x: p.x, y: p.y })
            .collect();
        Polygon::new(LineString::from(ring), vec![])
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Exact overlap test (separating axis theorem). Touching counts as
    /// overlapping.
    pub fn intersects(&self, other: &Obb) -> bool {
        let d = other.center - self.center;
        let a_axes = self.axes();
        let b_axes = other.axes();
        let a_ext = [0.5 * self.length, 0.5 * self.width];
        let b_ext = [0.5 * other.length, 0.5 * other.width];
        for n in a_axes.iter().chain(b_axes.iter()) {
            let ra = a_ext[0] * a_axes[0].dot(n).abs() + a_ext[1] * a_axes[1].dot(n).abs();
            let rb = b_ext[0] * b_axes[0].dot(n).abs() + b_ext[1] * b_axes[1].dot(n).abs();
            if d.dot(n).abs() > ra + rb {
                return false;
            }
        }
        true
    }

    /// True when the point lies inside or on the boundary.
    pub fn contains_point(&self, p: Point2<f64>) -> bool {
        let d = p - self.center;
        let [u, v] = self.axes();
        d.dot(&u).abs() <= 0.5 * self.length + 1e-12 && d.dot(&v).abs() <= 0.5 * self.width + 1e-12
    }
}
