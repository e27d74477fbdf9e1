//! Synthetic scene generation.
//!
//! A [`GroundTruth`] fixes a world: a local metric frame anchored at a
//! geodetic point, a camera with known intrinsics and distortion, and the
//! drone's image-to-world rotation. Trajectories scripted in world meters
//! are rendered backwards through that chain into the observed pixel inputs
//! the pipeline ingests, and [`write_bundle`] emits every input file
//! (tracking CSV, control points, flight log, map, signal plan, config) for
//! an end-to-end run. Because the truth is known exactly, generate-then-
//! recover tests can bound every stage's error.
//!
//! Everything here is deterministic: same inputs, same bytes.

use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};

use geo::{Coord, LineString, Polygon};
use nalgebra::{Matrix2, Point2, Rotation2, Vector2};

use crate::config::{
    CameraConfig, MetricsConfig, PathsConfig, PipelineConfig, TracksConfig, CONFIG_VERSION,
};
use crate::error::{Error, Result};
use crate::georef::{to_utm_zoned, CameraModel, LocalFrame, UtmZone};
use crate::ingest::{
    IntersectionMap, LaneDirection, LaneGroup, MovementDef, SignalState, TracksSchema, TurnKind,
};
use crate::model::{OrientedBoxState, TrackTable, Trajectory, Unit, VehicleClass};

// --- ground truth -----------------------------------------------------------

/// Geodetic anchor of the synthetic intersection (its inner-area centroid).
pub const ANCHOR_LON_DEG: f64 = 116.310;
pub const ANCHOR_LAT_DEG: f64 = 39.980;

/// The known world behind a synthetic scene.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub frame: LocalFrame,
    pub cam: CameraModel,
    /// Rotation from image axes (u right, v up after flip) to world
    /// east/north, radians.
    pub theta_rad: f64,
}

impl GroundTruth {
    /// 4K nadir camera at 120 m with barrel distortion (k1 = -0.05) and an
    /// 8 degree mount rotation.
    pub fn standard() -> Result<GroundTruth> {
        let zone = UtmZone::containing(ANCHOR_LAT_DEG, ANCHOR_LON_DEG)?;
        let origin = to_utm_zoned(ANCHOR_LAT_DEG, ANCHOR_LON_DEG, zone)?;
        let frame = LocalFrame {
            utm_zone: zone,
            origin_easting_m: origin.easting_m,
            origin_northing_m: origin.northing_m,
        };
        let cam = CameraModel::new(
            2400.0,
            2400.0,
            1920.0,
            1080.0,
            [-0.05, 0.008, 0.0003, -0.0002, 0.0],
            0.05,
            120.0,
            3840.0,
            2160.0,
        )?;
        Ok(GroundTruth { frame, cam, theta_rad: 8f64.to_radians() })
    }

    fn gsd(&self) -> f64 {
        self.cam.gsd_m_per_px
    }

    /// Local meters -> ideal (undistorted) pixel.
    pub fn ideal_px_of_local(&self, p: Point2<f64>) -> Point2<f64> {
        let q = Rotation2::new(-self.theta_rad) * Vector2::new(p.x, p.y) / self.gsd();
        Point2::new(self.cam.cx + q.x, self.cam.cy - q.y)
    }

    /// Ideal (undistorted) pixel -> local meters.
    pub fn local_of_ideal_px(&self, px: Point2<f64>) -> Point2<f64> {
        let q = Vector2::new(px.x - self.cam.cx, self.cam.cy - px.y) * self.gsd();
        let p = Rotation2::new(self.theta_rad) * q;
        Point2::new(p.x, p.y)
    }

    /// Local meters -> observed (distorted) pixel, as a tracker would see.
    pub fn observed_px_of_local(&self, p: Point2<f64>) -> Point2<f64> {
        self.cam.distort(self.ideal_px_of_local(p))
    }

    /// Numeric Jacobian d(observed px)/d(local m) at a local point.
    fn px_jacobian(&self, p: Point2<f64>) -> Matrix2<f64> {
        let h = 1e-4;
        let xp = self.observed_px_of_local(Point2::new(p.x + h, p.y));
        let xm = self.observed_px_of_local(Point2::new(p.x - h, p.y));
        let yp = self.observed_px_of_local(Point2::new(p.x, p.y + h));
        let ym = self.observed_px_of_local(Point2::new(p.x, p.y - h));
        Matrix2::new(
            (xp.x - xm.x) / (2.0 * h),
            (yp.x - ym.x) / (2.0 * h),
            (xp.y - xm.y) / (2.0 * h),
            (yp.y - ym.y) / (2.0 * h),
        )
    }

    /// Render one world-frame state into the observed pixel frame, the
    /// exact inverse of what georeferencing recovers: the yaw direction is
    /// pushed through the Jacobian and the box lengths are scaled so the
    /// round trip returns the original metric box.
    pub fn render_state(&self, s: &OrientedBoxState) -> Result<OrientedBoxState> {
        let center_px = self.observed_px_of_local(s.center);
        let jinv = self.px_jacobian(s.center);
        let j = jinv.try_inverse().ok_or_else(|| Error::NonFinite {
            context: format!("pixel jacobian at ({}, {})", s.center.x, s.center.y),
        })?;
        let along_img = jinv * Vector2::new(s.yaw_rad.cos(), s.yaw_rad.sin());
        let yaw_px = along_img.y.atan2(along_img.x);
        let unit_along = Vector2::new(yaw_px.cos(), yaw_px.sin());
        let unit_across = Vector2::new(-yaw_px.sin(), yaw_px.cos());
        let length_px = s.length / (j * unit_along).norm();
        let width_px = s.width / (j * unit_across).norm();
        Ok(OrientedBoxState {
            frame: s.frame,
            time_s: s.time_s,
            center: center_px,
            length: length_px,
            width: width_px,
            yaw_rad: yaw_px,
            heading_rad: None,
            speed_mps: None,
            accel_mps2: None,
            confidence: s.confidence,
            interpolated: false,
            source_px: None,
        })
    }

    /// Render a whole meter-frame table into pixel space.
    pub fn render_table(&self, world: &TrackTable) -> Result<TrackTable> {
        if world.unit != Unit::Meter {
            return Err(Error::UnitMismatch {
                expected: Unit::Meter.name(),
                got: world.unit.name(),
            });
        }
        let mut out = TrackTable::new(world.scene_id.clone(), Unit::Pixel, world.frame_rate_hz)?;
        for traj in world.iter() {
            let states: Vec<OrientedBoxState> =
                traj.states().iter().map(|s| self.render_state(s)).collect::<Result<_>>()?;
            out.insert(Trajectory::new(
                traj.track_id,
                traj.class,
                Unit::Pixel,
                traj.frame_rate_hz,
                states,
            )?)?;
        }
        Ok(out)
    }
}

// --- standard four-leg intersection -----------------------------------------

/// Half-width of the inner (crosswalk-free) area, meters.
pub const INNER_HALF_M: f64 = 14.0;
/// Half-width of the stop-line area (inner plus crosswalk bands), meters.
pub const STOP_HALF_M: f64 = 18.0;
/// Lane groups reach from the stop-line area out to this distance.
pub const LEG_LEN_M: f64 = 70.0;
/// Entering traffic keeps to the right: lanes span this offset band.
const LANE_NEAR_M: f64 = 0.5;
const LANE_FAR_M: f64 = 6.5;
/// Center line of an approach/exit lane band.
pub const LANE_CENTER_M: f64 = 3.5;

/// Edge names by approach index (counterclockwise quarter turns of north).
pub const EDGES: [&str; 4] = ["north", "west", "south", "east"];

fn initial(edge: &str) -> char {
    edge.chars().next().unwrap().to_ascii_uppercase()
}

/// Exact counterclockwise quarter-turn rotation, `k` times.
fn rot_point(p: Point2<f64>, k: usize) -> Point2<f64> {
    let mut q = p;
    for _ in 0..k % 4 {
        q = Point2::new(-q.y, q.x);
    }
    q
}

fn rect_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> [Point2<f64>; 4] {
    [
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ]
}

fn polygon_of(corners: &[Point2<f64>]) -> Polygon<f64> {
    let mut coords: Vec<Coord<f64>> =
        corners.iter().map(|p| Coord { x: p.x, y: p.y }).collect();
    coords.push(coords[0]);
    Polygon::new(LineString::from(coords), vec![])
}

struct LaneRect {
    edge: &'static str,
    direction: LaneDirection,
    corners: [Point2<f64>; 4],
    bearing_rad: f64,
}

/// The local-frame geometry of the standard intersection.
struct MapGeometry {
    stop: [Point2<f64>; 4],
    inner: [Point2<f64>; 4],
    crosswalks: Vec<[Point2<f64>; 4]>,
    lanes: Vec<LaneRect>,
    movements: Vec<MovementDef>,
}

fn standard_geometry() -> MapGeometry {
    let stop = rect_corners(-STOP_HALF_M, -STOP_HALF_M, STOP_HALF_M, STOP_HALF_M);
    let inner = rect_corners(-INNER_HALF_M, -INNER_HALF_M, INNER_HALF_M, INNER_HALF_M);
    // base (north) shapes, then quarter-turned to the other three arms
    let cw_north = rect_corners(-INNER_HALF_M, INNER_HALF_M, INNER_HALF_M, STOP_HALF_M);
    let entry_north = rect_corners(-LANE_FAR_M, STOP_HALF_M, -LANE_NEAR_M, LEG_LEN_M);
    let exit_north = rect_corners(LANE_NEAR_M, STOP_HALF_M, LANE_FAR_M, LEG_LEN_M);

    let mut crosswalks = Vec::new();
    let mut lanes = Vec::new();
    for k in 0..4 {
        crosswalks.push(cw_north.map(|p| rot_point(p, k)));
        lanes.push(LaneRect {
            edge: EDGES[k],
            direction: LaneDirection::Entry,
            corners: entry_north.map(|p| rot_point(p, k)),
            bearing_rad: crate::angle::wrap(-std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::FRAC_PI_2),
        });
        lanes.push(LaneRect {
            edge: EDGES[k],
            direction: LaneDirection::Exit,
            corners: exit_north.map(|p| rot_point(p, k)),
            bearing_rad: crate::angle::wrap(std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::FRAC_PI_2),
        });
    }

    let mut movements = Vec::new();
    for k in 0..4 {
        let entry = EDGES[k];
        for (kind, exit) in [
            (TurnKind::Straight, EDGES[(k + 2) % 4]),
            (TurnKind::Left, EDGES[(k + 3) % 4]),
            (TurnKind::Right, EDGES[(k + 1) % 4]),
        ] {
            movements.push(MovementDef {
                movement_id: format!("{}_{}", initial(entry), initial(exit)),
                entry_edge: entry.to_string(),
                exit_edge: exit.to_string(),
                kind,
            });
        }
    }
    MapGeometry { stop, inner, crosswalks, lanes, movements }
}

/// The standard intersection directly in the local metric frame, for tests
/// and library callers that skip the file round trip.
pub fn standard_local_map() -> IntersectionMap {
    let g = standard_geometry();
    IntersectionMap {
        stop_line_polygon: polygon_of(&g.stop),
        inner_polygon: polygon_of(&g.inner),
        crosswalks: g.crosswalks.iter().map(|c| polygon_of(c)).collect(),
        lane_groups: g
            .lanes
            .iter()
            .map(|l| LaneGroup {
                edge_id: l.edge.to_string(),
                direction: l.direction,
                polygon: polygon_of(&l.corners),
                bearing_rad: l.bearing_rad,
            })
            .collect(),
        movements: g.movements,
    }
}

/// All twelve movement definitions of the standard intersection.
pub fn standard_movements() -> Vec<MovementDef> {
    standard_geometry().movements
}

// --- signal plan -------------------------------------------------------------

/// Seconds in one cycle of the two-phase plan.
pub const CYCLE_S: i64 = 60;

/// Two-phase plan: north/south approaches get green [0, 25), yellow
/// [25, 28), red [28, 60); east/west get red [0, 30), green [30, 55),
/// yellow [55, 58), red [58, 60). Repeats for `cycles` cycles.
pub fn two_phase_signals(cycles: usize) -> Vec<(i64, String, SignalState)> {
    let movements = standard_movements();
    let mut entries = Vec::new();
    for t in 0..(cycles as i64) * CYCLE_S {
        let phase = t % CYCLE_S;
        for m in &movements {
            let ns = m.entry_edge == "north" || m.entry_edge == "south";
            let state = if ns {
                match phase {
                    0..=24 => SignalState::Green,
                    25..=27 => SignalState::Yellow,
                    _ => SignalState::Red,
                }
            } else {
                match phase {
                    30..=54 => SignalState::Green,
                    55..=57 => SignalState::Yellow,
                    _ => SignalState::Red,
                }
            };
            entries.push((t, m.movement_id.clone(), state));
        }
    }
    entries
}

// --- track scripting ----------------------------------------------------------

/// One piece of a scripted path.
#[derive(Debug, Clone)]
pub enum Segment {
    Line { from: Point2<f64>, to: Point2<f64> },
    /// Circular arc; counterclockwise when `end_rad > start_rad`.
    Arc { center: Point2<f64>, radius: f64, start_rad: f64, end_rad: f64 },
    /// Stand still (a queued vehicle); keeps the previous segment's pose.
    Dwell { seconds: f64 },
}

impl Segment {
    /// Quarter-turn the segment `k` times counterclockwise about the origin.
    pub fn rotated(&self, k: usize) -> Segment {
        let d = k as f64 * std::f64::consts::FRAC_PI_2;
        match *self {
            Segment::Line { from, to } => {
                Segment::Line { from: rot_point(from, k), to: rot_point(to, k) }
            }
            Segment::Arc { center, radius, start_rad, end_rad } => Segment::Arc {
                center: rot_point(center, k),
                radius,
                start_rad: start_rad + d,
                end_rad: end_rad + d,
            },
            Segment::Dwell { seconds } => Segment::Dwell { seconds },
        }
    }
}

/// A deterministic constant-speed track following a piecewise path.
#[derive(Debug, Clone)]
pub struct TrackScript {
    pub id: u64,
    pub class: VehicleClass,
    pub t0_s: f64,
    pub speed_mps: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub segments: Vec<Segment>,
}

enum Span {
    Line { from: Point2<f64>, dir: Vector2<f64>, speed: f64 },
    Arc { center: Point2<f64>, radius: f64, a0: f64, rate: f64 },
    Hold { pos: Point2<f64>, yaw: f64 },
}

impl Span {
    fn eval(&self, tau: f64) -> (Point2<f64>, f64, f64) {
        match *self {
            Span::Line { from, dir, speed } => {
                (from + dir * speed * tau, dir.y.atan2(dir.x), speed)
            }
            Span::Arc { center, radius, a0, rate } => {
                let a = a0 + rate * tau;
                let pos = center + radius * Vector2::new(a.cos(), a.sin());
                let yaw = a + std::f64::consts::FRAC_PI_2 * rate.signum();
                (pos, crate::angle::wrap(yaw), (rate * radius).abs())
            }
            Span::Hold { pos, yaw } => (pos, yaw, 0.0),
        }
    }

    fn end_pose(&self, dur: f64) -> (Point2<f64>, f64) {
        let (p, yaw, _) = self.eval(dur);
        (p, yaw)
    }
}

impl TrackScript {
    /// Sample the script at the scene frame rate into a meter-frame
    /// trajectory with exact speed/heading annotations.
    pub fn sample(&self, frame_rate_hz: f64) -> Result<Trajectory> {
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "script {} speed must be positive, got {}",
                self.id, self.speed_mps
            )));
        }
        let mut spans: Vec<(f64, Span)> = Vec::new();
        let mut prev_pose: Option<(Point2<f64>, f64)> = None;
        for seg in &self.segments {
            let (dur, span) = match *seg {
                Segment::Line { from, to } => {
                    let delta = to - from;
                    let len = delta.norm();
                    if len <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "script {}: zero-length line segment",
                            self.id
                        )));
                    }
                    (
                        len / self.speed_mps,
                        Span::Line { from, dir: delta / len, speed: self.speed_mps },
                    )
                }
                Segment::Arc { center, radius, start_rad, end_rad } => {
                    let sweep = end_rad - start_rad;
                    if !(radius > 0.0) || sweep == 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "script {}: degenerate arc",
                            self.id
                        )));
                    }
                    let dur = sweep.abs() * radius / self.speed_mps;
                    (
                        dur,
                        Span::Arc { center, radius, a0: start_rad, rate: sweep / dur },
                    )
                }
                Segment::Dwell { seconds } => {
                    let (pos, yaw) = prev_pose.ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "script {}: dwell cannot be the first segment",
                            self.id
                        ))
                    })?;
                    (seconds, Span::Hold { pos, yaw })
                }
            };
            prev_pose = Some(span.end_pose(dur));
            spans.push((dur, span));
        }
        let total: f64 = spans.iter().map(|(d, _)| d).sum();
        let f0 = ((self.t0_s * frame_rate_hz) - 1e-9).ceil() as i64;
        let f1 = (((self.t0_s + total) * frame_rate_hz) + 1e-9).floor() as i64;

        let mut states = Vec::with_capacity((f1 - f0 + 1).max(0) as usize);
        for f in f0..=f1 {
            let mut tau = (f as f64 / frame_rate_hz - self.t0_s).clamp(0.0, total);
            let mut pose = None;
            for (dur, span) in &spans {
                if tau <= *dur {
                    pose = Some(span.eval(tau));
                    break;
                }
                tau -= dur;
            }
            let (pos, yaw, speed) =
                pose.unwrap_or_else(|| spans.last().unwrap().1.eval(spans.last().unwrap().0));
            states.push(OrientedBoxState {
                frame: f,
                time_s: f as f64 / frame_rate_hz,
                center: pos,
                length: self.length_m,
                width: self.width_m,
                yaw_rad: yaw,
                heading_rad: Some(yaw),
                speed_mps: Some(speed),
                accel_mps2: Some(0.0),
                confidence: Some(0.95),
                interpolated: false,
                source_px: None,
            });
        }
        Trajectory::new(self.id, self.class, Unit::Meter, frame_rate_hz, states)
    }
}

/// Path through the standard intersection entering from approach `k`
/// (0 = north, 1 = west, 2 = south, 3 = east), reaching `ext` meters out on
/// both ends. Turns use tangent arc fillets, so yaw is continuous.
pub fn approach_path(k: usize, kind: TurnKind, ext: f64) -> Vec<Segment> {
    let c = LANE_CENTER_M;
    let base: Vec<Segment> = match kind {
        TurnKind::Straight => {
            vec![Segment::Line { from: Point2::new(-c, ext), to: Point2::new(-c, -ext) }]
        }
        // left to the east arm: fillet of radius 10 from heading -y to +x
        TurnKind::Left => {
            let r = 10.0;
            vec![
                Segment::Line { from: Point2::new(-c, ext), to: Point2::new(-c, r - c) },
                Segment::Arc {
                    center: Point2::new(r - c, r - c),
                    radius: r,
                    start_rad: std::f64::consts::PI,
                    end_rad: 1.5 * std::f64::consts::PI,
                },
                Segment::Line { from: Point2::new(r - c, -c), to: Point2::new(ext, -c) },
            ]
        }
        // right to the west arm: fillet of radius 6 from heading -y to -x
        TurnKind::Right => {
            let r = 6.0;
            vec![
                Segment::Line { from: Point2::new(-c, ext), to: Point2::new(-c, c + r) },
                Segment::Arc {
                    center: Point2::new(-c - r, c + r),
                    radius: r,
                    start_rad: 0.0,
                    end_rad: -std::f64::consts::FRAC_PI_2,
                },
                Segment::Line { from: Point2::new(-c - r, c), to: Point2::new(-ext, c) },
            ]
        }
        // half-circle back out the same arm
        TurnKind::Uturn => {
            let y0 = 10.0;
            vec![
                Segment::Line { from: Point2::new(-c, ext), to: Point2::new(-c, y0) },
                Segment::Arc {
                    center: Point2::new(0.0, y0),
                    radius: c,
                    start_rad: std::f64::consts::PI,
                    end_rad: 2.0 * std::f64::consts::PI,
                },
                Segment::Line { from: Point2::new(c, y0), to: Point2::new(c, ext) },
            ]
        }
    };
    base.iter().map(|s| s.rotated(k)).collect()
}

// --- input-file writers --------------------------------------------------------

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

/// Write a pixel-frame table as the tracking input CSV.
pub fn write_tracks_csv(path: &Path, table: &TrackTable) -> Result<()> {
    if table.unit != Unit::Pixel {
        return Err(Error::UnitMismatch { expected: Unit::Pixel.name(), got: table.unit.name() });
    }
    let mut out = String::from("frame,track_id,class,cx_px,cy_px,length_px,width_px,yaw_rad,confidence\n");
    for traj in table.iter() {
        for s in traj.states() {
            let conf = s.confidence.map(|c| c.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.frame,
                traj.track_id,
                traj.class.name(),
                s.center.x,
                s.center.y,
                s.length,
                s.width,
                s.yaw_rad,
                conf
            )
            .expect("string write");
        }
    }
    write_file(path, &out)
}

/// Write a grid of ground control points: observed (distorted) pixels with
/// their exact geodetic positions.
pub fn write_gcps_csv(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut out = String::from("pixel_x,pixel_y,lat_deg,lon_deg\n");
    let (w, h) = (truth.cam.image_width_px, truth.cam.image_height_px);
    let margin = 400.0;
    for iy in 0..3 {
        for ix in 0..4 {
            let ideal = Point2::new(
                margin + (w - 2.0 * margin) * ix as f64 / 3.0,
                margin + (h - 2.0 * margin) * iy as f64 / 2.0,
            );
            let observed = truth.cam.distort(ideal);
            let local = truth.local_of_ideal_px(ideal);
            let (lon, lat) = truth.frame.unproject_to_lonlat(local)?;
            writeln!(out, "{},{},{},{}", observed.x, observed.y, lat, lon).expect("string write");
        }
    }
    write_file(path, &out)
}

/// Write a flat hover log matching the ground-truth altitude.
pub fn write_flight_log_csv(path: &Path, truth: &GroundTruth, duration_s: i64) -> Result<()> {
    let mut out = String::from("time_s,altitude_m,pitch_deg,roll_deg,yaw_deg\n");
    for t in 0..=duration_s.max(1) {
        writeln!(out, "{},{},0,0,{}", t, truth.cam.altitude_m, truth.theta_rad.to_degrees())
            .expect("string write");
    }
    write_file(path, &out)
}

/// Write the signal plan CSV.
pub fn write_signals_csv(path: &Path, entries: &[(i64, String, SignalState)]) -> Result<()> {
    let mut out = String::from("time_s,movement_id,state\n");
    for (t, movement, state) in entries {
        writeln!(out, "{},{},{}", t, movement, state.name()).expect("string write");
    }
    write_file(path, &out)
}

fn lonlat_ring(corners: &[Point2<f64>], frame: &LocalFrame) -> Result<Vec<Vec<f64>>> {
    let mut ring = Vec::with_capacity(corners.len() + 1);
    for p in corners {
        let (lon, lat) = frame.unproject_to_lonlat(*p)?;
        ring.push(vec![lon, lat]);
    }
    ring.push(ring[0].clone());
    Ok(ring)
}

fn polygon_feature(
    role: &str,
    corners: &[Point2<f64>],
    frame: &LocalFrame,
    extra: &[(&str, serde_json::Value)],
) -> Result<geojson::Feature> {
    let mut props = serde_json::Map::new();
    props.insert("role".into(), serde_json::Value::String(role.into()));
    for (k, v) in extra {
        props.insert((*k).into(), v.clone());
    }
    Ok(geojson::Feature {
        bbox: None,
        geometry: Some(geojson::Geometry::new(geojson::Value::Polygon(vec![lonlat_ring(
            corners, frame,
        )?]))),
        id: None,
        properties: Some(props),
        foreign_members: None,
    })
}

/// Write the intersection map GeoJSON for the standard geometry, projected
/// to geodetic coordinates through the ground-truth frame.
pub fn write_map_geojson(path: &Path, frame: &LocalFrame) -> Result<()> {
    let g = standard_geometry();
    let mut features = Vec::new();
    features.push(polygon_feature("stopLine", &g.stop, frame, &[])?);
    features.push(polygon_feature("inner", &g.inner, frame, &[])?);
    for cw in &g.crosswalks {
        features.push(polygon_feature("crosswalk", cw, frame, &[])?);
    }
    for lane in &g.lanes {
        features.push(polygon_feature(
            "laneGroup",
            &lane.corners,
            frame,
            &[
                ("edge_id", serde_json::Value::String(lane.edge.into())),
                ("direction", serde_json::Value::String(lane.direction.name().into())),
                (
                    "bearing_rad",
                    serde_json::Value::Number(
                        serde_json::Number::from_f64(lane.bearing_rad).expect("finite bearing"),
                    ),
                ),
            ],
        )?);
    }
    let mut props = serde_json::Map::new();
    props.insert("role".into(), serde_json::Value::String("movements".into()));
    props.insert(
        "movements".into(),
        serde_json::to_value(&g.movements).map_err(|e| Error::Config(e.to_string()))?,
    );
    features.push(geojson::Feature {
        bbox: None,
        geometry: None,
        id: None,
        properties: Some(props),
        foreign_members: None,
    });
    let fc = geojson::FeatureCollection { bbox: None, features, foreign_members: None };
    write_file(path, &geojson::GeoJson::from(fc).to_string())
}

/// File names inside a generated scene bundle.
pub struct BundleFiles {
    pub config: PathBuf,
    pub out_dir: PathBuf,
}

/// Write a complete input bundle (tracking CSV rendered through the
/// ground-truth chain, control points, flight log, map, optional signal
/// plan, and a ready-to-run config) into `dir`.
pub fn write_bundle(
    dir: &Path,
    truth: &GroundTruth,
    world: &TrackTable,
    signals: Option<&[(i64, String, SignalState)]>,
) -> Result<BundleFiles> {
    std::fs::create_dir_all(dir)?;
    let pixels = truth.render_table(world)?;
    write_tracks_csv(&dir.join("tracks.csv"), &pixels)?;
    write_gcps_csv(&dir.join("gcps.csv"), truth)?;
    let max_t = world
        .iter()
        .flat_map(|t| t.states().last())
        .map(|s| s.time_s)
        .fold(0.0f64, f64::max);
    write_flight_log_csv(&dir.join("flight_log.csv"), truth, max_t.ceil() as i64 + 1)?;
    write_map_geojson(&dir.join("map.geojson"), &truth.frame)?;
    if let Some(entries) = signals {
        write_signals_csv(&dir.join("signals.csv"), entries)?;
    }

    let cfg = PipelineConfig {
        config_version: CONFIG_VERSION,
        paths: PathsConfig {
            tracks: "tracks.csv".into(),
            gcps: "gcps.csv".into(),
            map: "map.geojson".into(),
            out_dir: "out".into(),
            signals: signals.map(|_| "signals.csv".into()),
            flight_log: Some("flight_log.csv".into()),
        },
        camera: CameraConfig {
            fx: truth.cam.fx,
            fy: truth.cam.fy,
            cx: truth.cam.cx,
            cy: truth.cam.cy,
            dist: truth.cam.dist,
            image_width_px: truth.cam.image_width_px,
            image_height_px: truth.cam.image_height_px,
            gsd_m_per_px: Some(truth.cam.gsd_m_per_px),
            altitude_m: Some(truth.cam.altitude_m),
        },
        tracks: TracksConfig {
            frame_rate_hz: world.frame_rate_hz,
            scene_id: world.scene_id.clone(),
            schema: TracksSchema::default(),
        },
        smoother: Default::default(),
        filter: Default::default(),
        conflict: Default::default(),
        signal: Default::default(),
        metrics: MetricsConfig::default(),
    };
    let config = dir.join("config.toml");
    write_file(&config, &cfg.to_toml()?)?;
    Ok(BundleFiles { config, out_dir: dir.join("out") })
}

// --- the demo scene -------------------------------------------------------------

/// Scripted demo scene at 10 Hz over two signal cycles: compliant through
/// and turning traffic on every approach, one red-light runner whose run
/// creates an angle near-miss with cross traffic, a bus, and two
/// pedestrians on the crosswalks. Returns the world-frame table and the
/// signal plan.
pub fn demo_scene() -> Result<(TrackTable, Vec<(i64, String, SignalState)>)> {
    const RATE: f64 = 10.0;
    const EXT: f64 = 60.0;
    let car = |id, t0_s, speed_mps, segments| TrackScript {
        id,
        class: VehicleClass::Car,
        t0_s,
        speed_mps,
        length_m: 4.4,
        width_m: 1.9,
        segments,
    };
    let mut scripts = vec![
        // compliant through traffic in its green windows
        car(1, 4.0, 10.0, approach_path(0, TurnKind::Straight, EXT)),
        car(2, 10.0, 10.0, approach_path(2, TurnKind::Straight, EXT)),
        car(3, 32.0, 10.0, approach_path(1, TurnKind::Straight, EXT)),
        car(4, 38.0, 10.0, approach_path(3, TurnKind::Straight, EXT)),
        // turners in the second cycle
        car(5, 62.0, 8.0, approach_path(0, TurnKind::Left, EXT)),
        car(6, 66.0, 8.0, approach_path(2, TurnKind::Right, EXT)),
        car(7, 92.0, 8.0, approach_path(1, TurnKind::Left, EXT)),
        car(8, 96.0, 8.0, approach_path(3, TurnKind::Right, EXT)),
        // the red-light runner (north approach is red from 28 s)...
        car(9, 46.0, 10.0, approach_path(0, TurnKind::Straight, EXT)),
        // ...and the westbound car it cuts off (on green from 30 s), which
        // is briefly on a collision course and brakes to let the runner by
        car(
            10,
            45.6,
            10.0,
            vec![
                Segment::Line { from: Point2::new(EXT, 3.5), to: Point2::new(8.0, 3.5) },
                Segment::Dwell { seconds: 2.5 },
                Segment::Line { from: Point2::new(8.0, 3.5), to: Point2::new(-EXT, 3.5) },
            ],
        ),
    ];
    scripts.push(TrackScript {
        id: 11,
        class: VehicleClass::Bus,
        t0_s: 34.0,
        speed_mps: 9.0,
        length_m: 11.0,
        width_m: 2.8,
        segments: approach_path(1, TurnKind::Straight, EXT),
    });
    scripts.push(TrackScript {
        id: 12,
        class: VehicleClass::Pedestrian,
        t0_s: 5.0,
        speed_mps: 1.3,
        length_m: 0.6,
        width_m: 0.6,
        segments: vec![Segment::Line {
            from: Point2::new(-20.0, 16.0),
            to: Point2::new(20.0, 16.0),
        }],
    });
    scripts.push(TrackScript {
        id: 13,
        class: VehicleClass::Pedestrian,
        t0_s: 60.0,
        speed_mps: 1.3,
        length_m: 0.6,
        width_m: 0.6,
        segments: vec![Segment::Line {
            from: Point2::new(20.0, -16.0),
            to: Point2::new(-20.0, -16.0),
        }],
    });

    let mut table = TrackTable::new("demo", Unit::Meter, RATE)?;
    for script in &scripts {
        table.insert(script.sample(RATE)?)?;
    }
    Ok((table, two_phase_signals(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::{assign_routes, MovementKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn ideal_pixel_mapping_round_trips() {
        let truth = GroundTruth::standard().unwrap();
        for &(x, y) in &[(0.0, 0.0), (35.0, -81.0), (-60.0, 44.5), (90.0, 12.0)] {
            let px = truth.ideal_px_of_local(Point2::new(x, y));
            let back = truth.local_of_ideal_px(px);
            assert_abs_diff_eq!(back.x, x, epsilon = 1e-9);
            assert_abs_diff_eq!(back.y, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn rendered_states_recover_through_a_fitted_chain() {
        use crate::georef::{fit_homography, georeference_table, Gcp, GeoChain};
        let truth = GroundTruth::standard().unwrap();

        // GCPs exactly as the bundle writes them: observed px + geodetic
        let mut gcps = Vec::new();
        for iy in 0..3 {
            for ix in 0..4 {
                let ideal = Point2::new(400.0 + 1013.0 * ix as f64, 400.0 + 680.0 * iy as f64);
                let local = truth.local_of_ideal_px(ideal);
                let (lon, lat) = truth.frame.unproject_to_lonlat(local).unwrap();
                gcps.push(Gcp {
                    px: truth.cam.undistort(truth.cam.distort(ideal)).unwrap(),
                    lon_deg: lon,
                    lat_deg: lat,
                });
            }
        }
        let hom = fit_homography(&gcps).unwrap();
        assert!(hom.rms_residual_m < 1e-3, "rms {}", hom.rms_residual_m);
        let chain = GeoChain::new(truth.cam.clone(), hom, truth.frame);

        let script = TrackScript {
            id: 1,
            class: VehicleClass::Car,
            t0_s: 0.0,
            speed_mps: 9.0,
            length_m: 4.4,
            width_m: 1.9,
            segments: approach_path(0, TurnKind::Left, 55.0),
        };
        let mut world = TrackTable::new("rt", Unit::Meter, 10.0).unwrap();
        world.insert(script.sample(10.0).unwrap()).unwrap();
        let pixels = truth.render_table(&world).unwrap();
        let (recovered, report) = georeference_table(&pixels, &chain).unwrap();
        assert!(report.dropped_points.is_empty());

        let a = world.iter().next().unwrap();
        let b = recovered.iter().next().unwrap();
        for (sa, sb) in a.states().iter().zip(b.states()) {
            let err = (sa.center - sb.center).norm();
            assert!(err < 0.005, "position error {err} m at frame {}", sa.frame);
            assert!((sa.length - sb.length).abs() < 0.01, "length drift");
            assert!(
                crate::angle::distance(sa.yaw_rad, sb.yaw_rad).abs() < 1e-3,
                "yaw drift at frame {}",
                sa.frame
            );
        }
    }

    #[test]
    fn scripted_paths_have_continuous_yaw_and_constant_speed() {
        for kind in [TurnKind::Straight, TurnKind::Left, TurnKind::Right, TurnKind::Uturn] {
            for k in 0..4 {
                let script = TrackScript {
                    id: 1,
                    class: VehicleClass::Car,
                    t0_s: 0.0,
                    speed_mps: 8.0,
                    length_m: 4.4,
                    width_m: 1.9,
                    segments: approach_path(k, kind, 50.0),
                };
                let traj = script.sample(10.0).unwrap();
                let states = traj.states();
                assert!(states.len() > 50);
                for w in states.windows(2) {
                    // chords through arc frames are marginally shorter than
                    // the 0.8 m of path covered per frame
                    let step = (w[1].center - w[0].center).norm();
                    assert!((step - 0.8).abs() < 2e-3, "step {step}");
                    let dyaw = crate::angle::distance(w[0].yaw_rad, w[1].yaw_rad).abs();
                    assert!(dyaw < 0.25, "yaw jump {dyaw} for {kind:?} approach {k}");
                }
            }
        }
    }

    #[test]
    fn dwell_holds_pose_and_zeroes_speed() {
        let script = TrackScript {
            id: 7,
            class: VehicleClass::Car,
            t0_s: 0.0,
            speed_mps: 10.0,
            length_m: 4.4,
            width_m: 1.9,
            segments: vec![
                Segment::Line { from: Point2::new(-3.5, 40.0), to: Point2::new(-3.5, 20.0) },
                Segment::Dwell { seconds: 3.0 },
                Segment::Line { from: Point2::new(-3.5, 20.0), to: Point2::new(-3.5, 0.0) },
            ],
        };
        let traj = script.sample(10.0).unwrap();
        // 2 s drive, 3 s dwell, 2 s drive = frames 0..=70
        assert_eq!(traj.states().len(), 71);
        let dwelling = &traj.states()[25];
        assert_abs_diff_eq!(dwelling.center.y, 20.0, epsilon = 1e-9);
        assert_eq!(dwelling.speed_mps, Some(0.0));
        assert_eq!(dwelling.heading_rad, Some(dwelling.yaw_rad));
    }

    #[test]
    fn map_bundle_round_trips_through_the_parser() {
        let truth = GroundTruth::standard().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.geojson");
        write_map_geojson(&path, &truth.frame).unwrap();
        let doc = crate::ingest::parse_map(&path).unwrap();
        let local = doc.to_local(&truth.frame).unwrap();
        let want = standard_local_map();
        assert_eq!(local.movements, want.movements);
        assert_eq!(local.lane_groups.len(), want.lane_groups.len());
        use geo::Centroid;
        let c = local.inner_polygon.centroid().unwrap();
        assert_abs_diff_eq!(c.x(), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c.y(), 0.0, epsilon = 1e-6);
        for (got, want) in local.lane_groups.iter().zip(&want.lane_groups) {
            assert_eq!(got.edge_id, want.edge_id);
            assert_eq!(got.direction, want.direction);
            assert_abs_diff_eq!(got.bearing_rad, want.bearing_rad, epsilon = 1e-12);
            use geo::Area;
            assert_abs_diff_eq!(
                got.polygon.unsigned_area(),
                want.polygon.unsigned_area(),
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn demo_scene_routes_match_their_scripts() {
        let (table, signals) = demo_scene().unwrap();
        assert_eq!(table.len(), 13);
        let map = standard_local_map();
        let routes = assign_routes(&table, &map).unwrap();
        // scripted (id, entry, exit, kind)
        let want = [
            (1, "north", "south", MovementKind::Straight),
            (2, "south", "north", MovementKind::Straight),
            (3, "west", "east", MovementKind::Straight),
            (4, "east", "west", MovementKind::Straight),
            (5, "north", "east", MovementKind::Left),
            (6, "south", "east", MovementKind::Right),
            (7, "west", "north", MovementKind::Left),
            (8, "east", "north", MovementKind::Right),
            (9, "north", "south", MovementKind::Straight),
            (10, "east", "west", MovementKind::Straight),
            (11, "west", "east", MovementKind::Straight),
        ];
        for (id, entry, exit, kind) in want {
            let r = &routes[&id];
            assert_eq!(r.entry_edge.as_deref(), Some(entry), "track {id}");
            assert_eq!(r.exit_edge.as_deref(), Some(exit), "track {id}");
            assert_eq!(r.kind, kind, "track {id}");
        }
        // pedestrians are not motor vehicles and receive no route
        assert!(!routes.contains_key(&12));
        assert!(!routes.contains_key(&13));

        let timeline = crate::ingest::SignalTimeline::from_entries(&signals).unwrap();
        let report =
            crate::semantic::scan_violations(&routes, &table, &map, &timeline, &Default::default())
                .unwrap();
        let runners: Vec<u64> = report.events.iter().map(|e| e.track_id).collect();
        assert_eq!(runners, vec![9], "exactly the scripted red-light runner");

        let conflicts =
            crate::conflict::extract_conflicts(&table, &Default::default()).unwrap();
        assert_eq!(conflicts.len(), 1, "the scripted near-miss: {conflicts:?}");
        assert_eq!(conflicts[0].pair, (9, 10));
        assert_eq!(conflicts[0].kind, crate::conflict::ConflictKind::Angle);
    }
}
