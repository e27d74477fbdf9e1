//! Planar regions built from box footprints: swept areas, intersections, and
//! containment probes.

use geo::{Area, BooleanOps, Intersects, MultiPolygon, Polygon};

use crate::error::{Error, Result};
use crate::model::Trajectory;
use crate::ssm::obb::Obb;

/// Area below which a region is treated as empty; set-operation slivers from
/// nearly tangent footprints fall under this.
pub const MIN_REGION_AREA_M2: f64 = 1e-4;

/// A (possibly disconnected) region of the plane in square-meter units.
#[derive(Debug, Clone, PartialEq)]
pub struct Region(MultiPolygon<f64>);

impl Region {
    pub fn empty() -> Self {
        Region(MultiPolygon(vec![]))
    }

    pub fn from_polygons(polys: Vec<Polygon<f64>>) -> Self {
        let mut acc = MultiPolygon(vec![]);
        for p in polys {
            let mp = MultiPolygon(vec![p]);
            acc = if acc.0.is_empty() { mp } else { acc.union(&mp) };
        }
        Region(acc)
    }

    pub fn area_m2(&self) -> f64 {
        self.0.unsigned_area()
    }

    /// Empty in the operational sense: below the sliver threshold.
    pub fn is_empty(&self) -> bool {
        self.area_m2() <= MIN_REGION_AREA_M2
    }

    pub fn intersection(&self, other: &Region) -> Region {
        if self.0.0.is_empty() || other.0.0.is_empty() {
            return Region::empty();
        }
        Region(self.0.intersection(&other.0))
    }

    pub fn union(&self, other: &Region) -> Region {
        if self.0.0.is_empty() {
            return other.clone();
        }
        if other.0.0.is_empty() {
            return self.clone();
        }
        Region(self.0.union(&other.0))
    }

    /// True when the box footprint touches or overlaps the region.
    pub fn intersects_box(&self, b: &Obb) -> bool {
        !self.0.0.is_empty() && self.0.intersects(&b.to_polygon())
    }

    pub fn multipolygon(&self) -> &MultiPolygon<f64> {
        &self.0
    }
}

/// Union of all box footprints of `traj` with `t0 <= time_s <= t1` (inclusive).
pub fn swept_region(traj: &Trajectory, t0: f64, t1: f64) -> Result<Region> {
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::InvalidParameter(format!("bad time window [{t0}, {t1}]")));
    }
    let mut polys = Vec::new();
    for s in traj.states() {
        if s.time_s >= t0 && s.time_s <= t1 {
            polys.push(Obb::from_state(s)?.to_polygon());
        }
    }
    if polys.is_empty() {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    Ok(Region::from_polygons(polys))
}
