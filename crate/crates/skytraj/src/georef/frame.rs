//! Local east/north metric frame anchored at the intersection center.

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::georef::utm::{from_utm, to_utm_zoned, UtmCoord, UtmZone};

/// A translated UTM frame: x east, y north, meters, origin at the centroid of
/// the intersection's inner area so coordinates stay small and zone-local.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub utm_zone: UtmZone,
    pub origin_easting_m: f64,
    pub origin_northing_m: f64,
}

impl LocalFrame {
    /// UTM easting/northing to local meters.
    pub fn project(&self, c: UtmCoord) -> Point2<f64> {
        Point2::new(c.easting_m - self.origin_easting_m, c.northing_m - self.origin_northing_m)
    }

    /// Geodetic (lat, lon) degrees to local meters.
    pub fn project_lonlat(&self, lon_deg: f64, lat_deg: f64) -> Result<Point2<f64>> {
        Ok(self.project(to_utm_zoned(lat_deg, lon_deg, self.utm_zone)?))
    }

    /// Local meters back to UTM.
    pub fn unproject(&self, p: Point2<f64>) -> UtmCoord {
        UtmCoord {
            easting_m: p.x + self.origin_easting_m,
            northing_m: p.y + self.origin_northing_m,
            zone: self.utm_zone,
        }
    }

    /// Local meters back to (lon, lat) degrees.
    pub fn unproject_to_lonlat(&self, p: Point2<f64>) -> Result<(f64, f64)> {
        let (lat, lon) = from_utm(&self.unproject(p))?;
        Ok((lon, lat))
    }
}

/// Area centroid of a simple polygon by the shoelace formula. Vertices may be
/// open or closed; orientation does not matter. Fails on (near-)zero area.
fn shoelace_centroid(vertices: &[(f64, f64)]) -> Result<(f64, f64)> {
    if vertices.len() < 3 {
        return Err(Error::MapGeometry("polygon needs at least 3 vertices".into()));
    }
    let mut ring: Vec<(f64, f64)> = vertices.to_vec();
    if ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::MapGeometry("polygon needs at least 3 distinct vertices".into()));
    }
    // work relative to the first vertex for conditioning at UTM magnitudes
    let (rx, ry) = ring[0];
    let mut twice_area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..ring.len() {
        let (x0, y0) = (ring[i].0 - rx, ring[i].1 - ry);
        let j = (i + 1) % ring.len();
        let (x1, y1) = (ring[j].0 - rx, ring[j].1 - ry);
        let cross = x0 * y1 - x1 * y0;
        twice_area += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if twice_area.abs() < 1e-9 {
        return Err(Error::MapGeometry("inner polygon has zero area".into()));
    }
    Ok((rx + cx / (3.0 * twice_area), ry + cy / (3.0 * twice_area)))
}

/// Build the local frame from the intersection's inner polygon given in
/// (lon, lat) degrees: project the vertices to UTM and place the origin at
/// their area centroid.
pub fn build_local_frame(inner_lonlat: &[(f64, f64)]) -> Result<LocalFrame> {
    if inner_lonlat.len() < 3 {
        return Err(Error::MapGeometry("inner polygon needs at least 3 vertices".into()));
    }
    let n = inner_lonlat.len() as f64;
    let mean_lon = inner_lonlat.iter().map(|v| v.0).sum::<f64>() / n;
    let mean_lat = inner_lonlat.iter().map(|v| v.1).sum::<f64>() / n;
    let zone = UtmZone::containing(mean_lat, mean_lon)?;
    let mut en = Vec::with_capacity(inner_lonlat.len());
    for &(lon, lat) in inner_lonlat {
        let c = to_utm_zoned(lat, lon, zone)?;
        en.push((c.easting_m, c.northing_m));
    }
    let (e0, n0) = shoelace_centroid(&en)?;
    Ok(LocalFrame { utm_zone: zone, origin_easting_m: e0, origin_northing_m: n0 })
}
