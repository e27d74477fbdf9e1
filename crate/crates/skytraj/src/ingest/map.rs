//! Intersection map parser: a documented GeoJSON subset.
//!
//! The map is a FeatureCollection in WGS84 lon/lat. Each polygon feature
//! carries a `role` property — `stopLine` (exactly one), `inner` (exactly
//! one), `crosswalk` (any number), or `laneGroup` (with `edge_id`,
//! `direction` = entry|exit, and `bearing_rad` measured from east toward
//! north). Movement definitions ride on one geometry-less feature with
//! `role = "movements"` whose `movements` property lists
//! `{movement_id, entry_edge, exit_edge, kind}` rows.
//!
//! Structural checks (closed simple rings, known roles, edge references) run
//! at parse time on the raw document; metric invariants (inner polygon inside
//! the stop-line polygon and disjoint from crosswalks) run when the document
//! is projected into the local frame, where areas are meaningful.

use std::fmt;
use std::path::Path;

use geo::{Area, BooleanOps, Coord, LineString, MapCoords, Polygon};
use geojson::{FeatureCollection, GeoJson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::georef::LocalFrame;
use crate::ssm::MIN_REGION_AREA_M2;

/// Movement geometry class through the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnKind {
    Left,
    Straight,
    Right,
    Uturn,
}

impl TurnKind {
    pub fn name(self) -> &'static str {
        match self {
            TurnKind::Left => "left",
            TurnKind::Straight => "straight",
            TurnKind::Right => "right",
            TurnKind::Uturn => "uturn",
        }
    }
}

impl fmt::Display for TurnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneDirection {
    Entry,
    Exit,
}

impl LaneDirection {
    pub fn name(self) -> &'static str {
        match self {
            LaneDirection::Entry => "entry",
            LaneDirection::Exit => "exit",
        }
    }
}

/// One signalized movement through the intersection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovementDef {
    pub movement_id: String,
    pub entry_edge: String,
    pub exit_edge: String,
    pub kind: TurnKind,
}

/// A group of lanes where a road edge meets the intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGroup {
    pub edge_id: String,
    pub direction: LaneDirection,
    pub polygon: Polygon<f64>,
    /// Direction of travel across the stop line, radians from +x (east)
    /// toward +y (north).
    pub bearing_rad: f64,
}

/// The parsed map, still in WGS84 lon/lat degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDocument {
    pub stop_line_polygon: Polygon<f64>,
    pub inner_polygon: Polygon<f64>,
    pub crosswalks: Vec<Polygon<f64>>,
    pub lane_groups: Vec<LaneGroup>,
    pub movements: Vec<MovementDef>,
}

/// The map projected into the local east/north frame (meters) with all
/// geometric invariants verified.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionMap {
    pub stop_line_polygon: Polygon<f64>,
    pub inner_polygon: Polygon<f64>,
    pub crosswalks: Vec<Polygon<f64>>,
    pub lane_groups: Vec<LaneGroup>,
    pub movements: Vec<MovementDef>,
}

impl IntersectionMap {
    pub fn lane_group(&self, edge_id: &str, direction: LaneDirection) -> Option<&LaneGroup> {
        self.lane_groups.iter().find(|g| g.edge_id == edge_id && g.direction == direction)
    }

    pub fn movement(&self, movement_id: &str) -> Result<&MovementDef> {
        self.movements
            .iter()
            .find(|m| m.movement_id == movement_id)
            .ok_or_else(|| Error::UnknownMovement(movement_id.to_string()))
    }

    pub fn movement_between(&self, entry_edge: &str, exit_edge: &str) -> Option<&MovementDef> {
        self.movements.iter().find(|m| m.entry_edge == entry_edge && m.exit_edge == exit_edge)
    }
}

fn geometry_error(id: &str, message: impl Into<String>) -> Error {
    Error::MapGeometry(format!("{id}: {}", message.into()))
}

/// Validate one GeoJSON polygon: single closed exterior ring, at least 4
/// coordinates, distinct vertices, finite, and simple (no self-intersection).
fn extract_polygon(id: &str, value: &geojson::Value) -> Result<Polygon<f64>> {
    let rings = match value {
        geojson::Value::Polygon(rings) => rings,
        other => {
            return Err(geometry_error(
                id,
                format!("expected Polygon geometry, got {}", other.type_name()),
            ))
        }
    };
    if rings.is_empty() {
        return Err(geometry_error(id, "polygon has no rings"));
    }
    if rings.len() > 1 {
        return Err(geometry_error(id, "interior rings (holes) are not supported"));
    }
    let ring = &rings[0];
    if ring.len() < 4 {
        return Err(geometry_error(id, "ring needs at least 4 coordinates (closed triangle)"));
    }
    if ring.first() != ring.last() {
        return Err(geometry_error(id, "ring is not closed (first and last coordinates differ)"));
    }
    let open: Vec<Coord<f64>> = ring[..ring.len() - 1]
        .iter()
        .map(|c| Coord { x: c[0], y: c[1] })
        .collect();
    for c in &open {
        if !(c.x.is_finite() && c.y.is_finite()) {
            return Err(geometry_error(id, "non-finite coordinate"));
        }
    }
    for (i, a) in open.iter().enumerate() {
        for b in &open[i + 1..] {
            if a == b {
                return Err(geometry_error(id, "repeated vertex"));
            }
        }
    }
    if ring_self_intersects(&open) {
        return Err(geometry_error(id, "self-intersecting ring"));
    }
    Ok(Polygon::new(LineString::from(open), vec![]))
}

/// Brute-force simplicity test: no two non-adjacent edges of the ring may
/// touch. Rings here are small (intersection geometry), so O(n^2) is fine.
fn ring_self_intersects(open: &[Coord<f64>]) -> bool {
    use geo::algorithm::line_intersection::line_intersection;
    use geo::Line;
    let n = open.len();
    for i in 0..n {
        let a = Line::new(open[i], open[(i + 1) % n]);
        for j in i + 1..n {
            // skip the shared-endpoint neighbours (including the wrap-around)
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let b = Line::new(open[j], open[(j + 1) % n]);
            if line_intersection(a, b).is_some() {
                return true;
            }
        }
    }
    false
}

fn property<'a>(
    feature: &'a geojson::Feature,
    key: &str,
    id: &str,
) -> Result<&'a serde_json::Value> {
    feature
        .properties
        .as_ref()
        .and_then(|p| p.get(key))
        .ok_or_else(|| geometry_error(id, format!("missing property `{key}`")))
}

/// Parse the intersection map GeoJSON. Geometry stays in WGS84 lon/lat;
/// project with [`MapDocument::to_local`] before metric use.
pub fn parse_map(path: &Path) -> Result<MapDocument> {
    let invalid = |message: String| Error::InvalidFile { path: path.to_path_buf(), message };
    let contents = std::fs::read_to_string(path)?;
    let gj: GeoJson = contents.parse().map_err(|e| invalid(format!("not GeoJSON: {e}")))?;
    let fc = FeatureCollection::try_from(gj)
        .map_err(|e| invalid(format!("not a FeatureCollection: {e}")))?;

    let mut stop_line = None;
    let mut inner = None;
    let mut crosswalks = Vec::new();
    let mut lane_groups = Vec::new();
    let mut movements: Option<Vec<MovementDef>> = None;

    for (i, feature) in fc.features.iter().enumerate() {
        let role = property(feature, "role", &format!("feature {i}"))?
            .as_str()
            .ok_or_else(|| invalid(format!("feature {i}: role must be a string")))?
            .to_string();
        let id = format!("feature {i} ({role})");
        let polygon = || -> Result<Polygon<f64>> {
            let geometry = feature
                .geometry
                .as_ref()
                .ok_or_else(|| geometry_error(&id, "missing geometry"))?;
            extract_polygon(&id, &geometry.value)
        };
        match role.as_str() {
            "stopLine" => {
                if stop_line.replace(polygon()?).is_some() {
                    return Err(invalid("more than one stopLine feature".into()));
                }
            }
            "inner" => {
                if inner.replace(polygon()?).is_some() {
                    return Err(invalid("more than one inner feature".into()));
                }
            }
            "crosswalk" => crosswalks.push(polygon()?),
            "laneGroup" => {
                let edge_id = property(feature, "edge_id", &id)?
                    .as_str()
                    .ok_or_else(|| geometry_error(&id, "edge_id must be a string"))?
                    .to_string();
                let direction = match property(feature, "direction", &id)?.as_str() {
                    Some("entry") => LaneDirection::Entry,
                    Some("exit") => LaneDirection::Exit,
                    other => {
                        return Err(geometry_error(
                            &id,
                            format!("direction must be entry or exit, got {other:?}"),
                        ))
                    }
                };
                let bearing_rad = property(feature, "bearing_rad", &id)?
                    .as_f64()
                    .filter(|b| b.is_finite())
                    .ok_or_else(|| geometry_error(&id, "bearing_rad must be a finite number"))?;
                lane_groups.push(LaneGroup { edge_id, direction, polygon: polygon()?, bearing_rad });
            }
            "movements" => {
                let table = property(feature, "movements", &id)?;
                let rows: Vec<MovementDef> = serde_json::from_value(table.clone())
                    .map_err(|e| invalid(format!("movements table: {e}")))?;
                if rows.is_empty() {
                    return Err(invalid("movements table is empty".into()));
                }
                if movements.replace(rows).is_some() {
                    return Err(invalid("more than one movements feature".into()));
                }
            }
            other => return Err(invalid(format!("feature {i}: unknown role `{other}`"))),
        }
    }

    let stop_line_polygon =
        stop_line.ok_or_else(|| invalid("missing stopLine feature".into()))?;
    let inner_polygon = inner.ok_or_else(|| invalid("missing inner feature".into()))?;
    let movements = movements.ok_or_else(|| invalid("missing movements feature".into()))?;

    // movement edge references must resolve to lane groups of matching direction
    for m in &movements {
        let has = |edge: &str, dir: LaneDirection| {
            lane_groups.iter().any(|g| g.edge_id == edge && g.direction == dir)
        };
        if !has(&m.entry_edge, LaneDirection::Entry) {
            return Err(invalid(format!(
                "movement `{}` references missing entry edge `{}`",
                m.movement_id, m.entry_edge
            )));
        }
        if !has(&m.exit_edge, LaneDirection::Exit) {
            return Err(invalid(format!(
                "movement `{}` references missing exit edge `{}`",
                m.movement_id, m.exit_edge
            )));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for m in &movements {
        if !seen.insert(m.movement_id.clone()) {
            return Err(invalid(format!("duplicate movement id `{}`", m.movement_id)));
        }
    }

    Ok(MapDocument { stop_line_polygon, inner_polygon, crosswalks, lane_groups, movements })
}

impl MapDocument {
    /// Project every polygon into the local frame and verify the metric
    /// invariants: the inner polygon lies inside the stop-line polygon and
    /// shares no area with any crosswalk (touching boundaries are fine — the
    /// inner area is derived by carving the crosswalks out).
    pub fn to_local(&self, frame: &LocalFrame) -> Result<IntersectionMap> {
        let project = |poly: &Polygon<f64>| -> Result<Polygon<f64>> {
            poly.try_map_coords(|c| {
                let p = frame.project_lonlat(c.x, c.y)?;
                Ok::<Coord<f64>, Error>(Coord { x: p.x, y: p.y })
            })
        };
        let stop_line_polygon = project(&self.stop_line_polygon)?;
        let inner_polygon = project(&self.inner_polygon)?;
        let crosswalks: Vec<Polygon<f64>> =
            self.crosswalks.iter().map(&project).collect::<Result<_>>()?;
        let lane_groups: Vec<LaneGroup> = self
            .lane_groups
            .iter()
            .map(|g| {
                Ok(LaneGroup {
                    edge_id: g.edge_id.clone(),
                    direction: g.direction,
                    polygon: project(&g.polygon)?,
                    bearing_rad: g.bearing_rad,
                })
            })
            .collect::<Result<_>>()?;

        if inner_polygon.unsigned_area() < MIN_REGION_AREA_M2 {
            return Err(Error::MapGeometry("inner polygon has ~zero area".into()));
        }
        let outside = inner_polygon.difference(&stop_line_polygon).unsigned_area();
        if outside > MIN_REGION_AREA_M2 {
            return Err(Error::MapGeometry(format!(
                "inner polygon extends {outside:.4} m2 beyond the stopLine polygon"
            )));
        }
        for (i, cw) in crosswalks.iter().enumerate() {
            let overlap = inner_polygon.intersection(cw).unsigned_area();
            if overlap > MIN_REGION_AREA_M2 {
                return Err(Error::MapGeometry(format!(
                    "inner polygon overlaps crosswalk {i} by {overlap:.4} m2"
                )));
            }
        }
        Ok(IntersectionMap {
            stop_line_polygon,
            inner_polygon,
            crosswalks,
            lane_groups,
            movements: self.movements.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::georef::build_local_frame;
    use std::io::Write;

    const LON0: f64 = 103.84;
    const LAT0: f64 = 1.30;

    /// Convert local meters around (LON0, LAT0) to lon/lat for fixtures.
    fn ll(x_m: f64, y_m: f64) -> (f64, f64) {
        (LON0 + x_m / 111_320.0 / LAT0.to_radians().cos(), LAT0 + y_m / 110_574.0)
    }

    fn ring_json(corners: &[(f64, f64)]) -> serde_json::Value {
        let mut coords: Vec<Vec<f64>> = corners
            .iter()
            .map(|&(x, y)| {
                let (lon, lat) = ll(x, y);
                vec![lon, lat]
            })
            .collect();
        coords.push(coords[0].clone());
        serde_json::json!([coords])
    }

    fn rect(cx: f64, cy: f64, w: f64, h: f64) -> Vec<(f64, f64)> {
        vec![
            (cx - w / 2.0, cy - h / 2.0),
            (cx + w / 2.0, cy - h / 2.0),
            (cx + w / 2.0, cy + h / 2.0),
            (cx - w / 2.0, cy + h / 2.0),
        ]
    }

    fn polygon_feature(role: &str, ring: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "type": "Feature",
            "properties": {"role": role},
            "geometry": {"type": "Polygon", "coordinates": ring}
        })
    }

    fn lane_feature(edge: &str, dir: &str, bearing: f64, ring: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "type": "Feature",
            "properties": {"role": "laneGroup", "edge_id": edge, "direction": dir, "bearing_rad": bearing},
            "geometry": {"type": "Polygon", "coordinates": ring}
        })
    }

    /// A four-arm intersection: 60 m stop-line square, 30 m inner square,
    /// one crosswalk strip per arm between them, entry/exit lane groups on
    /// the north and south arms.
    fn fixture(inner_side: f64) -> serde_json::Value {
        let features = vec![
            polygon_feature("stopLine", ring_json(&rect(0.0, 0.0, 60.0, 60.0))),
            polygon_feature("inner", ring_json(&rect(0.0, 0.0, inner_side, inner_side))),
            polygon_feature("crosswalk", ring_json(&rect(0.0, 20.0, 30.0, 6.0))),
            polygon_feature("crosswalk", ring_json(&rect(0.0, -20.0, 30.0, 6.0))),
            lane_feature("north", "entry", -std::f64::consts::FRAC_PI_2, ring_json(&rect(-7.5, 40.0, 15.0, 20.0))),
            lane_feature("north", "exit", std::f64::consts::FRAC_PI_2, ring_json(&rect(7.5, 40.0, 15.0, 20.0))),
            lane_feature("south", "entry", std::f64::consts::FRAC_PI_2, ring_json(&rect(7.5, -40.0, 15.0, 20.0))),
            lane_feature("south", "exit", -std::f64::consts::FRAC_PI_2, ring_json(&rect(-7.5, -40.0, 15.0, 20.0))),
            serde_json::json!({
                "type": "Feature",
                "properties": {"role": "movements", "movements": [
                    {"movement_id": "N_S", "entry_edge": "north", "exit_edge": "south", "kind": "straight"},
                    {"movement_id": "S_N", "entry_edge": "south", "exit_edge": "north", "kind": "straight"},
                ]},
                "geometry": null
            }),
        ];
        serde_json::json!({"type": "FeatureCollection", "features": features})
    }

    fn write_map(value: &serde_json::Value) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(serde_json::to_string_pretty(value).unwrap().as_bytes()).unwrap();
        f
    }

    fn frame_for(doc: &MapDocument) -> LocalFrame {
        let ring: Vec<(f64, f64)> =
            doc.inner_polygon.exterior().coords().map(|c| (c.x, c.y)).collect();
        build_local_frame(&ring).unwrap()
    }

    #[test]
    fn valid_map_parses_and_projects() {
        let f = write_map(&fixture(30.0));
        let doc = parse_map(f.path()).unwrap();
        assert_eq!(doc.crosswalks.len(), 2);
        assert_eq!(doc.lane_groups.len(), 4);
        assert_eq!(doc.movements.len(), 2);
        let frame = frame_for(&doc);
        let map = doc.to_local(&frame).unwrap();
        // inner square is 30 m on a side, centered at the frame origin
        let area = map.inner_polygon.unsigned_area();
        assert!((area - 900.0).abs() < 1.0, "inner area {area}");
        assert_eq!(map.movement("N_S").unwrap().kind, TurnKind::Straight);
        assert!(map.movement("E_W").is_err());
        assert!(map.lane_group("north", LaneDirection::Entry).is_some());
        assert_eq!(map.movement_between("south", "north").unwrap().movement_id, "S_N");
    }

    #[test]
    fn inner_overlapping_crosswalk_rejected() {
        // inner grown to 50 m swallows the crosswalk strips at y = +-20
        let f = write_map(&fixture(50.0));
        let doc = parse_map(f.path()).unwrap();
        let frame = frame_for(&doc);
        let err = doc.to_local(&frame).unwrap_err();
        assert!(err.to_string().contains("overlaps crosswalk"), "{err}");
    }

    #[test]
    fn inner_outside_stop_line_rejected() {
        let f = write_map(&fixture(80.0));
        let doc = parse_map(f.path()).unwrap();
        let frame = frame_for(&doc);
        let err = doc.to_local(&frame).unwrap_err();
        assert!(err.to_string().contains("beyond the stopLine"), "{err}");
    }

    #[test]
    fn self_intersecting_ring_rejected() {
        let mut v = fixture(30.0);
        // bowtie: swap two corners of the first crosswalk
        v["features"][2]["geometry"]["coordinates"] =
            ring_json(&[(-15.0, 17.0), (15.0, 23.0), (15.0, 17.0), (-15.0, 23.0)]);
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("self-intersecting"), "{err}");
        assert!(err.to_string().contains("crosswalk"), "{err}");
    }

    #[test]
    fn unclosed_ring_rejected() {
        let mut v = fixture(30.0);
        let ring = &mut v["features"][0]["geometry"]["coordinates"][0];
        ring.as_array_mut().unwrap().pop(); // drop the closing coordinate
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("not closed"), "{err}");
    }

    #[test]
    fn missing_edge_reference_rejected() {
        let mut v = fixture(30.0);
        v["features"][8]["properties"]["movements"][0]["entry_edge"] =
            serde_json::json!("west");
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("missing entry edge `west`"), "{err}");
    }

    #[test]
    fn unknown_role_rejected() {
        let mut v = fixture(30.0);
        v["features"][2]["properties"]["role"] = serde_json::json!("sidewalk");
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("unknown role `sidewalk`"), "{err}");
    }

    #[test]
    fn holes_rejected() {
        let mut v = fixture(30.0);
        let outer = v["features"][0]["geometry"]["coordinates"][0].clone();
        let hole = ring_json(&rect(0.0, 0.0, 5.0, 5.0))[0].clone();
        v["features"][0]["geometry"]["coordinates"] = serde_json::json!([outer, hole]);
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("holes"), "{err}");
    }

    #[test]
    fn duplicate_movement_id_rejected() {
        let mut v = fixture(30.0);
        v["features"][8]["properties"]["movements"][1]["movement_id"] =
            serde_json::json!("N_S");
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate movement id"), "{err}");
    }

    #[test]
    fn missing_movements_feature_rejected() {
        let mut v = fixture(30.0);
        v["features"].as_array_mut().unwrap().pop();
        let f = write_map(&v);
        let err = parse_map(f.path()).unwrap_err();
        assert!(err.to_string().contains("missing movements feature"), "{err}");
    }
}
