//! Ground-control-point and ruler-measurement CSV parsers.

use std::path::Path;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::georef::{Gcp, RulerPair};

/// Surveyed control points tying pixels to geodetic positions (WGS84 decimal
/// degrees, no other datum).
#[derive(Debug, Clone, PartialEq)]
pub struct GcpSet {
    points: Vec<Gcp>,
}

impl GcpSet {
    /// Validate: at least 4 points, no two pixel positions coincident, and
    /// the pixel positions not all collinear.
    pub fn new(points: Vec<Gcp>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::TooFewGcps(points.len()));
        }
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                if (a.px - b.px).norm() < 1e-9 {
                    return Err(Error::DegenerateGcps);
                }
            }
        }
        if all_collinear(&points) {
            return Err(Error::DegenerateGcps);
        }
        Ok(GcpSet { points })
    }

    pub fn points(&self) -> &[Gcp] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn all_collinear(points: &[Gcp]) -> bool {
    // area of the triangle spanned with the two extreme points stays ~zero
    // for every third point when the set is collinear
    let a = points[0].px;
    let b = points
        .iter()
        .map(|g| g.px)
        .max_by(|p, q| (p - a).norm().total_cmp(&(q - a).norm()))
        .unwrap();
    let ab = b - a;
    let scale = ab.norm().max(1.0);
    points.iter().all(|g| {
        let ap = g.px - a;
        (ab.x * ap.y - ab.y * ap.x).abs() / (scale * scale) < 1e-9
    })
}

/// Parse the GCP CSV (`pixel_x,pixel_y,lat_deg,lon_deg`).
pub fn parse_gcps(path: &Path) -> Result<GcpSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let (c_px, c_py, c_lat, c_lon) =
        (col("pixel_x")?, col("pixel_y")?, col("lat_deg")?, col("lon_deg")?);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        let num = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                message: format!("bad {name} `{raw}`"),
            })
        };
        let px = num(c_px, "pixel_x")?;
        let py = num(c_py, "pixel_y")?;
        let lat = num(c_lat, "lat_deg")?;
        let lon = num(c_lon, "lon_deg")?;
        if !(px.is_finite() && py.is_finite()) || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                message: "pixel must be finite, lat in [-90, 90], lon in [-180, 180]".into(),
            });
        }
        points.push(Gcp { px: Point2::new(px, py), lon_deg: lon, lat_deg: lat });
    }
    GcpSet::new(points)
}

/// Parse the ruler CSV (`px_x1,px_y1,px_x2,px_y2,true_length_m`): observed
/// pixel endpoints of segments whose metric length is known.
pub fn parse_rulers(path: &Path) -> Result<Vec<RulerPair>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let (c_x1, c_y1, c_x2, c_y2, c_len) =
        (col("px_x1")?, col("px_y1")?, col("px_x2")?, col("px_y2")?, col("true_length_m")?);
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        let num = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                message: format!("bad {name} `{raw}`"),
            })
        };
        let pair = RulerPair {
            a: Point2::new(num(c_x1, "px_x1")?, num(c_y1, "px_y1")?),
            b: Point2::new(num(c_x2, "px_x2")?, num(c_y2, "px_y2")?),
            true_length_m: num(c_len, "true_length_m")?,
        };
        if !(pair.true_length_m > 0.0 && pair.true_length_m.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                message: format!("true_length_m must be positive, got {}", pair.true_length_m),
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn rectangle_of_four_is_valid() {
        let content = "pixel_x,pixel_y,lat_deg,lon_deg\n\
                       100,100,1.3001,103.8401\n\
                       3900,100,1.3001,103.8409\n\
                       3900,2900,1.2999,103.8409\n\
                       100,2900,1.2999,103.8401\n";
        let f = write_csv(content);
        let set = parse_gcps(f.path()).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.points()[1].px, Point2::new(3900.0, 100.0));
        assert_eq!(set.points()[1].lat_deg, 1.3001);
    }

    #[test]
    fn three_points_rejected() {
        let content = "pixel_x,pixel_y,lat_deg,lon_deg\n\
                       100,100,1.3,103.84\n200,100,1.3,103.85\n200,200,1.31,103.85\n";
        let f = write_csv(content);
        assert!(matches!(parse_gcps(f.path()), Err(Error::TooFewGcps(3))));
    }

    #[test]
    fn collinear_points_rejected() {
        let content = "pixel_x,pixel_y,lat_deg,lon_deg\n\
                       0,0,1.3,103.84\n100,50,1.3,103.85\n200,100,1.31,103.85\n300,150,1.32,103.86\n";
        let f = write_csv(content);
        assert!(matches!(parse_gcps(f.path()), Err(Error::DegenerateGcps)));
    }

    #[test]
    fn coincident_pixels_rejected() {
        let content = "pixel_x,pixel_y,lat_deg,lon_deg\n\
                       0,0,1.3,103.84\n100,50,1.3,103.85\n100,50,1.31,103.85\n300,300,1.32,103.86\n";
        let f = write_csv(content);
        assert!(matches!(parse_gcps(f.path()), Err(Error::DegenerateGcps)));
    }

    #[test]
    fn latitude_out_of_range_rejected() {
        let content = "pixel_x,pixel_y,lat_deg,lon_deg\n0,0,91.0,103.84\n";
        let f = write_csv(content);
        assert!(parse_gcps(f.path()).is_err());
    }

    #[test]
    fn rulers_parse() {
        let content = "px_x1,px_y1,px_x2,px_y2,true_length_m\n\
                       100,100,400,100,12.0\n2000,500,2000,800,9.6\n";
        let f = write_csv(content);
        let pairs = parse_rulers(f.path()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].true_length_m, 12.0);
        assert_eq!(pairs[1].a, Point2::new(2000.0, 500.0));
    }

    #[test]
    fn nonpositive_ruler_length_rejected() {
        let content = "px_x1,px_y1,px_x2,px_y2,true_length_m\n100,100,400,100,0.0\n";
        let f = write_csv(content);
        assert!(parse_rulers(f.path()).is_err());
    }
}
