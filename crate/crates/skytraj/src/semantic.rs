//! Spatio-temporal matching: turning-movement assignment, signal-state
//! synchronization, and red-light-running detection.
//!
//! A trajectory is matched to the map in three steps. First its stop-line
//! entry and exit instants are found from box–polygon intersection. Then the
//! approach and departure lane groups are matched by position *and* yaw: the
//! box center must lie inside the group polygon while the yaw points within
//! 45 degrees of the group's travel bearing, taking the frame nearest the
//! stop-line crossing. Finally the (entry, exit) edge pair is looked up in the
//! map's declared movement table — never inferred from geometry — with one
//! exception: a pair that leaves by the edge it arrived on with a reversed
//! bearing is a U-turn even when the table omits it.

use std::collections::BTreeMap;

use geo::Intersects;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::ingest::{IntersectionMap, LaneDirection, LaneGroup, SignalState, SignalTimeline, TurnKind};
use crate::model::{ClassGroup, OrientedBoxState, TrackTable, Trajectory, Unit};
use crate::ssm::Obb;

/// Maximum yaw-to-bearing mismatch for a lane-group match, degrees.
pub const MAX_BEARING_MISMATCH_DEG: f64 = 45.0;
/// Minimum folded bearing reversal for the U-turn fallback, degrees.
pub const UTURN_MIN_REVERSAL_DEG: f64 = 150.0;

/// Signal synchronization and violation policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    /// Added to trajectory time before querying the signal timeline, seconds.
    /// Positive when the signal clock runs ahead of the video clock.
    pub offset_s: f64,
    /// Treat an entry during yellow like an entry during red. Off by default:
    /// only red entries are violations.
    pub violation_on_yellow: bool,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig { offset_s: 0.0, violation_on_yellow: false }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.offset_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "signal offset must be finite, got {}",
                self.offset_s
            )));
        }
        Ok(())
    }
}

/// Movement geometry of a matched route, or `Anomalous` when nothing matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MovementKind {
    Left,
    Straight,
    Right,
    Uturn,
    Anomalous,
}

impl From<TurnKind> for MovementKind {
    fn from(k: TurnKind) -> Self {
        match k {
            TurnKind::Left => MovementKind::Left,
            TurnKind::Straight => MovementKind::Straight,
            TurnKind::Right => MovementKind::Right,
            TurnKind::Uturn => MovementKind::Uturn,
        }
    }
}

impl MovementKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "left" => MovementKind::Left,
            "straight" => MovementKind::Straight,
            "right" => MovementKind::Right,
            "uturn" => MovementKind::Uturn,
            "anomalous" => MovementKind::Anomalous,
            other => {
                return Err(Error::InvalidParameter(format!("unknown movement kind `{other}`")))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MovementKind::Left => "left",
            MovementKind::Straight => "straight",
            MovementKind::Right => "right",
            MovementKind::Uturn => "uturn",
            MovementKind::Anomalous => "anomalous",
        }
    }
}

impl std::fmt::Display for MovementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where and when one trajectory crossed the intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteAnnotation {
    pub track_id: u64,
    /// Matched approach edge, when position and yaw agreed with one.
    pub entry_edge: Option<String>,
    pub exit_edge: Option<String>,
    /// Movement id from the map table. Empty for anomalous routes and for
    /// U-turns recognized by the bearing-reversal rule rather than the table.
    pub movement_id: Option<String>,
    pub kind: MovementKind,
    /// First time the box intersects the stop-line polygon, seconds.
    pub t_entry: Option<f64>,
    /// Last such time, seconds.
    pub t_exit: Option<f64>,
}

/// Traffic-rule violation detected for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationEvent {
    pub track_id: u64,
    pub movement_id: String,
    /// Stop-line entry time (video clock), seconds.
    pub t_violation: f64,
    pub kind: ViolationKind,
    /// Aspect shown for the movement at entry. Red unless the yellow policy
    /// is enabled.
    pub signal_state_at_entry: SignalState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    RedLightRunning,
}

impl ViolationKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "red_light_running" => Ok(ViolationKind::RedLightRunning),
            other => Err(Error::InvalidParameter(format!("unknown violation kind `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::RedLightRunning => "red_light_running",
        }
    }
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Violations plus non-violation observations worth keeping (for example a
/// red entry that stopped short of the inner polygon).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub events: Vec<ViolationEvent>,
    pub notes: Vec<String>,
}

fn require_meters(traj: &Trajectory) -> Result<()> {
    if traj.unit != Unit::Meter {
        return Err(Error::UnitMismatch {
            expected: Unit::Meter.name(),
            got: traj.unit.name(),
        });
    }
    Ok(())
}

fn box_hits(s: &OrientedBoxState, polygon: &geo::Polygon<f64>) -> Result<bool> {
    Ok(polygon.intersects(&Obb::from_state(s)?.to_polygon()))
}

/// First and last time the trajectory's box intersects `polygon`, if ever.
/// Touching the boundary counts; a single grazing frame yields equal times.
pub fn entry_exit_times(
    traj: &Trajectory,
    polygon: &geo::Polygon<f64>,
) -> Result<(Option<f64>, Option<f64>)> {
    require_meters(traj)?;
    let mut t_entry = None;
    let mut t_exit = None;
    for s in traj.states() {
        if box_hits(s, polygon)? {
            t_entry.get_or_insert(s.time_s);
            t_exit = Some(s.time_s);
        }
    }
    Ok((t_entry, t_exit))
}

/// Match a lane group by position and yaw at the frame nearest the stop-line
/// crossing. `states` must be ordered nearest-first.
fn match_edge<'m, 's>(
    states: impl Iterator<Item = &'s OrientedBoxState>,
    groups: &[&'m LaneGroup],
) -> Option<&'m LaneGroup> {
    for s in states {
        for group in groups {
            let inside = group.polygon.intersects(&geo::Point::new(s.center.x, s.center.y));
            if inside && angle::fold_deg(s.yaw_rad, group.bearing_rad) <= MAX_BEARING_MISMATCH_DEG {
                return Some(group);
            }
        }
    }
    None
}

/// Assign entry/exit edges and the turning movement for one trajectory.
///
/// Never fails on unmatched geometry: a route that misses the stop line or
/// the movement table comes back `Anomalous`.
pub fn assign_turn(traj: &Trajectory, map: &IntersectionMap) -> Result<RouteAnnotation> {
    require_meters(traj)?;
    let (t_entry, t_exit) = entry_exit_times(traj, &map.stop_line_polygon)?;
    let mut route = RouteAnnotation {
        track_id: traj.track_id,
        entry_edge: None,
        exit_edge: None,
        movement_id: None,
        kind: MovementKind::Anomalous,
        t_entry,
        t_exit,
    };
    let (Some(t_in), Some(t_out)) = (t_entry, t_exit) else {
        return Ok(route);
    };

    let entries: Vec<&LaneGroup> =
        map.lane_groups.iter().filter(|g| g.direction == LaneDirection::Entry).collect();
    let exits: Vec<&LaneGroup> =
        map.lane_groups.iter().filter(|g| g.direction == LaneDirection::Exit).collect();
    // Approach: walk backward from the entry instant so the nearest frame wins.
    let approach = traj.states().iter().rev().filter(|s| s.time_s <= t_in);
    let entry_group = match_edge(approach, &entries);
    // Departure: walk forward from the exit instant.
    let departure = traj.states().iter().filter(|s| s.time_s >= t_out);
    let exit_group = match_edge(departure, &exits);

    route.entry_edge = entry_group.map(|g| g.edge_id.clone());
    route.exit_edge = exit_group.map(|g| g.edge_id.clone());
    if let (Some(enter), Some(leave)) = (entry_group, exit_group) {
        if let Some(movement) = map.movement_between(&enter.edge_id, &leave.edge_id) {
            route.movement_id = Some(movement.movement_id.clone());
            route.kind = movement.kind.into();
        } else if enter.edge_id == leave.edge_id
            && angle::fold_deg(enter.bearing_rad, leave.bearing_rad) > UTURN_MIN_REVERSAL_DEG
        {
            // Left by the arrival edge against its approach direction: a
            // U-turn, even when the movement table does not declare one.
            route.kind = MovementKind::Uturn;
        }
    }
    Ok(route)
}

/// Annotate every motor vehicle in the table. Keyed by track id.
pub fn assign_routes(table: &TrackTable, map: &IntersectionMap) -> Result<BTreeMap<u64, RouteAnnotation>> {
    let mvs: Vec<&Trajectory> =
        table.iter().filter(|t| t.group() == ClassGroup::Mv).collect();
    let routes: Vec<Result<RouteAnnotation>> =
        mvs.par_iter().map(|t| assign_turn(t, map)).collect();
    let mut out = BTreeMap::new();
    for r in routes {
        let r = r?;
        out.insert(r.track_id, r);
    }
    Ok(out)
}

/// Signal aspect for `movement` at video time `t_s`, after applying the
/// configured clock offset. Errors when the shifted instant falls outside
/// timeline coverage.
pub fn signal_state_at(
    timeline: &SignalTimeline,
    t_s: f64,
    movement: &str,
    cfg: &SignalConfig,
) -> Result<SignalState> {
    cfg.validate()?;
    timeline.state_at(movement, t_s + cfg.offset_s)
}

/// Check one annotated route for red-light running.
///
/// An event requires a red entry *and* a subsequent crossing of the inner
/// polygon; a vehicle that encroaches past the stop line but never reaches
/// the inner area is reported in the notes instead. Routes without an entry
/// time or without a matched movement produce nothing.
pub fn detect_violations(
    route: &RouteAnnotation,
    traj: &Trajectory,
    map: &IntersectionMap,
    timeline: &SignalTimeline,
    cfg: &SignalConfig,
) -> Result<ViolationReport> {
    require_meters(traj)?;
    cfg.validate()?;
    let mut report = ViolationReport::default();
    let (Some(t_entry), Some(movement_id)) = (route.t_entry, route.movement_id.as_deref()) else {
        return Ok(report);
    };
    let state = signal_state_at(timeline, t_entry, movement_id, cfg)?;
    let against_signal = state == SignalState::Red
        || (cfg.violation_on_yellow && state == SignalState::Yellow);
    if !against_signal {
        return Ok(report);
    }
    let crossed = traj
        .states()
        .iter()
        .filter(|s| s.time_s >= t_entry)
        .map(|s| box_hits(s, &map.inner_polygon))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .any(|hit| hit);
    if crossed {
        report.events.push(ViolationEvent {
            track_id: route.track_id,
            movement_id: movement_id.to_string(),
            t_violation: t_entry,
            kind: ViolationKind::RedLightRunning,
            signal_state_at_entry: state,
        });
    } else {
        report.notes.push(format!(
            "track {}: {} entry at {:.3} s without inner crossing (encroachment, movement {})",
            route.track_id,
            state.name(),
            t_entry,
            movement_id
        ));
    }
    Ok(report)
}

/// Run violation detection over every annotated route. Events are sorted by
/// `(t_violation, track_id)`.
pub fn scan_violations(
    routes: &BTreeMap<u64, RouteAnnotation>,
    table: &TrackTable,
    map: &IntersectionMap,
    timeline: &SignalTimeline,
    cfg: &SignalConfig,
) -> Result<ViolationReport> {
    let mut combined = ViolationReport::default();
    for route in routes.values() {
        let Some(traj) = table.get(route.track_id) else {
            return Err(Error::InvalidParameter(format!(
                "route references unknown track {}",
                route.track_id
            )));
        };
        let mut one = detect_violations(route, traj, map, timeline, cfg)?;
        combined.events.append(&mut one.events);
        combined.notes.append(&mut one.notes);
    }
    combined
        .events
        .sort_by(|a, b| a.t_violation.total_cmp(&b.t_violation).then(a.track_id.cmp(&b.track_id)));
    Ok(combined)
}
