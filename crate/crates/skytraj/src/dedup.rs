//! Three-pass removal of false and redundant trajectories: cheap heuristics,
//! then collision-marker (persistent box overlap) screening, then shared-zone
//! timing (simultaneous zone entry) screening.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{IntersectionMap, LaneDirection};
use crate::model::{ClassGroup, TrackTable, Trajectory, Unit};
use crate::ssm::{candidate_pairs, dgt, ttc, Obb, TtcValue};

/// Why a trajectory was removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    ShortDuration,
    LowDisplacement,
    LowConfidence,
    TtcOverlap,
    DgtDuplicate,
}

impl FilterReason {
    pub fn name(self) -> &'static str {
        match self {
            FilterReason::ShortDuration => "short_duration",
            FilterReason::LowDisplacement => "low_displacement",
            FilterReason::LowConfidence => "low_confidence",
            FilterReason::TtcOverlap => "ttc_overlap",
            FilterReason::DgtDuplicate => "dgt_duplicate",
        }
    }
}

impl fmt::Display for FilterReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One removal decision. Pairwise reasons always name the surviving partner.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub track_id: u64,
    pub reason: FilterReason,
    pub partner_id: Option<u64>,
}

/// Audit log of a filter pass: removals are tombstones, the kept table is
/// returned alongside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    pub removed: Vec<Removal>,
    pub kept_count: usize,
    /// Borderline pairs that were examined but kept, for auditing.
    pub notes: Vec<String>,
}

impl FilterReport {
    pub fn merge(mut self, later: FilterReport) -> FilterReport {
        self.removed.extend(later.removed);
        self.notes.extend(later.notes);
        self.kept_count = later.kept_count;
        self
    }
}

/// Thresholds for all three passes. A track is removed only when its value is
/// strictly below a minimum — values equal to the threshold are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_duration_s: f64,
    pub min_displacement_m: f64,
    pub min_confidence: f64,
    /// Consecutive frames of box overlap that mark a redundant pair.
    pub k_overlap_frames: usize,
    /// Fraction of the shorter track's frames that must lie in the shared
    /// zone before a zero-gap pair is treated as a duplicate.
    pub min_overlap_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_duration_s: 1.0,
            min_displacement_m: 1.0,
            min_confidence: 0.5,
            k_overlap_frames: 5,
            min_overlap_ratio: 0.5,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("min_duration_s", self.min_duration_s),
            ("min_displacement_m", self.min_displacement_m),
        ];
        for (name, v) in positive {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Config(format!(
                "min_confidence must be within [0, 1], got {}",
                self.min_confidence
            )));
        }
        if self.k_overlap_frames == 0 {
            return Err(Error::Config("k_overlap_frames must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_overlap_ratio) {
            return Err(Error::Config(format!(
                "min_overlap_ratio must be within [0, 1], got {}",
                self.min_overlap_ratio
            )));
        }
        Ok(())
    }
}

/// Search radius for candidate-pair generation; both pairwise passes look
/// for boxes that actually touch, so a small margin suffices.
const PAIR_RADIUS_M: f64 = 1.0;

fn require_meters(table: &TrackTable) -> Result<()> {
    if table.unit != Unit::Meter {
        return Err(Error::UnitMismatch { expected: Unit::Meter.name(), got: table.unit.name() });
    }
    Ok(())
}

/// True when an idling motor vehicle sits in a stop-line approach (an entry
/// lane group), where waiting at a red light is legitimate.
fn idles_at_approach(traj: &Trajectory, map: Option<&IntersectionMap>) -> bool {
    let Some(map) = map else { return false };
    if traj.class.group() != ClassGroup::Mv {
        return false;
    }
    use geo::Intersects;
    traj.states().iter().any(|s| {
        let Ok(obb) = Obb::from_state(s) else { return false };
        let poly = obb.to_polygon();
        map.lane_groups
            .iter()
            .filter(|g| g.direction == LaneDirection::Entry)
            .any(|g| g.polygon.intersects(&poly))
    })
}

/// Pass 1: duration, displacement, and confidence thresholds.
///
/// The displacement test is waived for motor vehicles overlapping an entry
/// lane group, so vehicles queueing at a red light survive.
pub fn heuristic_filter(
    table: &TrackTable,
    cfg: &FilterConfig,
    map: Option<&IntersectionMap>,
) -> Result<(TrackTable, FilterReport)> {
    require_meters(table)?;
    cfg.validate()?;
    let mut kept = table.like();
    let mut report = FilterReport::default();
    for traj in table.iter() {
        let reason = if traj.duration_s()? < cfg.min_duration_s {
            Some(FilterReason::ShortDuration)
        } else if traj.net_displacement_m()? < cfg.min_displacement_m
            && !idles_at_approach(traj, map)
        {
            Some(FilterReason::LowDisplacement)
        } else if traj.mean_confidence().unwrap_or(0.0) < cfg.min_confidence {
            Some(FilterReason::LowConfidence)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                report.removed.push(Removal { track_id: traj.track_id, reason, partner_id: None })
            }
            None => kept.insert(traj.clone())?,
        }
    }
    report.kept_count = kept.len();
    Ok((kept, report))
}

/// Between two redundant tracks, pick the one to remove: shorter duration,
/// then lower mean confidence, then higher track id.
fn pick_victim<'t>(a: &'t Trajectory, b: &'t Trajectory) -> (&'t Trajectory, &'t Trajectory) {
    // tables reject empty trajectories, so duration is always defined
    let da = a.duration_s().expect("non-empty trajectory");
    let db = b.duration_s().expect("non-empty trajectory");
    let ca = a.mean_confidence().unwrap_or(0.0);
    let cb = b.mean_confidence().unwrap_or(0.0);
    let a_is_victim = match da.total_cmp(&db) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => match ca.total_cmp(&cb) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => a.track_id > b.track_id,
        },
    };
    if a_is_victim {
        (a, b)
    } else {
        (b, a)
    }
}

/// Longest run of consecutive video frames in which the two boxes overlap.
fn longest_overlap_run(a: &Trajectory, b: &Trajectory) -> Result<usize> {
    let mut run = 0usize;
    let mut best = 0usize;
    let mut prev_frame: Option<i64> = None;
    for sa in a.states() {
        let Some(sb) = b.state_at_frame(sa.frame) else { continue };
        let va = sa.velocity().ok_or(Error::VelocitiesMissing { track_id: a.track_id })?;
        let vb = sb.velocity().ok_or(Error::VelocitiesMissing { track_id: b.track_id })?;
        let result = ttc(&Obb::from_state(sa)?, va, &Obb::from_state(sb)?, vb)?;
        if result.value == TtcValue::Overlap {
            run = if prev_frame == Some(sa.frame - 1) { run + 1 } else { 1 };
            best = best.max(run);
            prev_frame = Some(sa.frame);
        } else {
            run = 0;
            prev_frame = None;
        }
    }
    Ok(best)
}

fn commit_removals(
    table: &TrackTable,
    marked: Vec<(u64, u64)>,
    reason: FilterReason,
) -> Result<(TrackTable, FilterReport)> {
    let mut dead: BTreeSet<u64> = BTreeSet::new();
    let mut report = FilterReport::default();
    for (ia, ib) in marked {
        if dead.contains(&ia) || dead.contains(&ib) {
            continue;
        }
        let (victim, survivor) =
            pick_victim(table.get(ia).expect("marked id"), table.get(ib).expect("marked id"));
        dead.insert(victim.track_id);
        report.removed.push(Removal {
            track_id: victim.track_id,
            reason,
            partner_id: Some(survivor.track_id),
        });
    }
    let mut kept = table.like();
    for traj in table.iter() {
        if !dead.contains(&traj.track_id) {
            kept.insert(traj.clone())?;
        }
    }
    report.kept_count = kept.len();
    Ok((kept, report))
}

/// Pass 2: pairs whose boxes overlap for at least `k_overlap_frames`
/// consecutive frames are redundant; the shorter track is removed.
pub fn ttc_overlap_filter(
    table: &TrackTable,
    cfg: &FilterConfig,
) -> Result<(TrackTable, FilterReport)> {
    require_meters(table)?;
    cfg.validate()?;
    let pairs = candidate_pairs(table, PAIR_RADIUS_M);
    let marked: Vec<(u64, u64)> = pairs
        .par_iter()
        .map(|&(ia, ib)| -> Result<Option<(u64, u64)>> {
            let a = table.get(ia).expect("candidate id");
            let b = table.get(ib).expect("candidate id");
            Ok((longest_overlap_run(a, b)? >= cfg.k_overlap_frames).then_some((ia, ib)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    commit_removals(table, marked, FilterReason::TtcOverlap)
}

/// Pass 3: pairs that enter their shared swept zone at the same moment
/// (zero gap time) and stay co-located for at least `min_overlap_ratio` of
/// the shorter track's life are duplicates; the shorter track is removed.
pub fn dgt_duplicate_filter(
    table: &TrackTable,
    cfg: &FilterConfig,
) -> Result<(TrackTable, FilterReport)> {
    require_meters(table)?;
    cfg.validate()?;
    let pairs = candidate_pairs(table, PAIR_RADIUS_M);
    enum Verdict {
        Remove(u64, u64),
        Note(String),
    }
    let verdicts: Vec<Verdict> = pairs
        .par_iter()
        .map(|&(ia, ib)| -> Result<Option<Verdict>> {
            let a = table.get(ia).expect("candidate id");
            let b = table.get(ib).expect("candidate id");
            let result = match dgt(a, b, None) {
                Ok(r) => r,
                Err(Error::NoSharedWindow { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let (Some(zone), Some(value)) = (&result.zone, result.value_s) else {
                return Ok(None);
            };
            if value.abs() > 1e-9 {
                return Ok(None);
            }
            let (shorter, _) = pick_victim(a, b);
            let in_zone = shorter
                .states()
                .iter()
                .filter(|s| Obb::from_state(s).map(|o| zone.intersects_box(&o)).unwrap_or(false))
                .count();
            let ratio = in_zone as f64 / shorter.states().len() as f64;
            if ratio >= cfg.min_overlap_ratio {
                Ok(Some(Verdict::Remove(ia, ib)))
            } else {
                Ok(Some(Verdict::Note(format!(
                    "pair ({ia}, {ib}): simultaneous zone entry but overlap ratio {ratio:.2} < {:.2}; both kept",
                    cfg.min_overlap_ratio
                ))))
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut marked = Vec::new();
    let mut notes = Vec::new();
    for v in verdicts {
        match v {
            Verdict::Remove(a, b) => marked.push((a, b)),
            Verdict::Note(n) => notes.push(n),
        }
    }
    let (kept, mut report) = commit_removals(table, marked, FilterReason::DgtDuplicate)?;
    report.notes = notes;
    Ok((kept, report))
}

/// All three passes in their fixed order, with one merged report.
pub fn run_filters(
    table: &TrackTable,
    cfg: &FilterConfig,
    map: Option<&IntersectionMap>,
) -> Result<(TrackTable, FilterReport)> {
    let (t1, r1) = heuristic_filter(table, cfg, map)?;
    let (t2, r2) = ttc_overlap_filter(&t1, cfg)?;
    let (t3, r3) = dgt_duplicate_filter(&t2, cfg)?;
    Ok((t3, r1.merge(r2).merge(r3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OrientedBoxState, VehicleClass};
    use geo::{polygon, Polygon};
    use nalgebra::{Point2, Vector2};

    const RATE: f64 = 10.0;

    /// Straight constant-velocity track with velocities filled in, as the
    /// smoothing stage would produce.
    fn straight(
        id: u64,
        class: VehicleClass,
        start: (f64, f64),
        vel: (f64, f64),
        frames: usize,
        conf: f64,
    ) -> Trajectory {
        let v = Vector2::new(vel.0, vel.1);
        let speed = v.norm();
        let heading = if speed > 1e-12 { v.y.atan2(v.x) } else { 0.0 };
        let states: Vec<OrientedBoxState> = (0..frames)
            .map(|i| {
                let t = i as f64 / RATE;
                let mut s = OrientedBoxState::observed(
                    i as i64,
                    t,
                    Point2::new(start.0 + v.x * t, start.1 + v.y * t),
                    4.0,
                    2.0,
                    heading,
                    conf,
                );
                s.speed_mps = Some(speed);
                s.heading_rad = Some(heading);
                s
            })
            .collect();
        Trajectory::new(id, class, Unit::Meter, RATE, states).unwrap()
    }

    fn table_of(tracks: Vec<Trajectory>) -> TrackTable {
        let mut t = TrackTable::new("s", Unit::Meter, RATE).unwrap();
        for track in tracks {
            t.insert(track).unwrap();
        }
        t
    }

    fn reasons(report: &FilterReport) -> Vec<(u64, FilterReason)> {
        report.removed.iter().map(|r| (r.track_id, r.reason)).collect()
    }

    #[test]
    fn short_duration_removed_boundary_kept() {
        // 3 frames at 10 Hz covers (3-1+1)/10 = 0.3 s; 10 frames covers 1.0 s
        let table = table_of(vec![
            straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 3, 0.9),
            straight(2, VehicleClass::Car, (0.0, 10.0), (5.0, 0.0), 10, 0.9),
        ]);
        let (kept, report) = heuristic_filter(&table, &FilterConfig::default(), None).unwrap();
        assert_eq!(reasons(&report), vec![(1, FilterReason::ShortDuration)]);
        assert_eq!(kept.len(), 1);
        assert!(kept.get(2).is_some());
    }

    #[test]
    fn static_shadow_removed_for_low_displacement() {
        // 60 s nearly static: 0.2 m total drift
        let table = table_of(vec![straight(
            1,
            VehicleClass::Car,
            (0.0, 0.0),
            (0.2 / 60.0, 0.0),
            600,
            0.9,
        )]);
        let (kept, report) = heuristic_filter(&table, &FilterConfig::default(), None).unwrap();
        assert_eq!(reasons(&report), vec![(1, FilterReason::LowDisplacement)]);
        assert_eq!(kept.len(), 0);
    }

    fn approach_map(entry_rect: Polygon<f64>) -> IntersectionMap {
        IntersectionMap {
            stop_line_polygon: polygon![(x: -50.0, y: -50.0), (x: 50.0, y: -50.0), (x: 50.0, y: 50.0), (x: -50.0, y: 50.0)],
            inner_polygon: polygon![(x: -20.0, y: -20.0), (x: 20.0, y: -20.0), (x: 20.0, y: 20.0), (x: -20.0, y: 20.0)],
            crosswalks: vec![],
            lane_groups: vec![crate::ingest::LaneGroup {
                edge_id: "north".into(),
                direction: LaneDirection::Entry,
                polygon: entry_rect,
                bearing_rad: 0.0,
            }],
            movements: vec![],
        }
    }

    #[test]
    fn idling_mv_in_entry_lane_is_waived() {
        let map = approach_map(
            polygon![(x: -5.0, y: 20.0), (x: 5.0, y: 20.0), (x: 5.0, y: 45.0), (x: -5.0, y: 45.0)],
        );
        let idle_in_lane = straight(1, VehicleClass::Car, (0.0, 30.0), (0.0, 0.0), 120, 0.9);
        let idle_outside = straight(2, VehicleClass::Car, (40.0, -40.0), (0.0, 0.0), 120, 0.9);
        let idle_pedestrian = straight(3, VehicleClass::Pedestrian, (0.0, 30.0), (0.0, 0.0), 120, 0.9);
        let table = table_of(vec![idle_in_lane, idle_outside, idle_pedestrian]);
        let (kept, report) = heuristic_filter(&table, &FilterConfig::default(), Some(&map)).unwrap();
        assert!(kept.get(1).is_some(), "queueing car must survive");
        assert_eq!(
            reasons(&report),
            vec![(2, FilterReason::LowDisplacement), (3, FilterReason::LowDisplacement)]
        );
    }

    #[test]
    fn mean_confidence_strictly_below_half_removed() {
        let table = table_of(vec![
            straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 20, 0.49),
            straight(2, VehicleClass::Car, (0.0, 10.0), (5.0, 0.0), 20, 0.50),
        ]);
        let (kept, report) = heuristic_filter(&table, &FilterConfig::default(), None).unwrap();
        assert_eq!(reasons(&report), vec![(1, FilterReason::LowConfidence)]);
        assert!(kept.get(2).is_some(), "value equal to the threshold is kept");
    }

    #[test]
    fn ghost_riding_a_car_is_removed_with_partner() {
        let car = straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 30, 0.9);
        // ghost: same motion, slightly offset, half the life
        let ghost = straight(2, VehicleClass::Car, (0.1, 0.1), (5.0, 0.0), 15, 0.8);
        let (kept, report) =
            ttc_overlap_filter(&table_of(vec![car, ghost]), &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert!(kept.get(1).is_some());
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.removed[0].track_id, 2);
        assert_eq!(report.removed[0].reason, FilterReason::TtcOverlap);
        assert_eq!(report.removed[0].partner_id, Some(1));
    }

    #[test]
    fn transient_queue_contact_keeps_both() {
        // stationary lead car; follower's box touches it on exactly one frame
        let lead = straight(1, VehicleClass::Car, (0.0, 0.0), (0.5, 0.0), 20, 0.9);
        let mut follower_states = Vec::new();
        for i in 0..20i64 {
            let x = if i == 10 { -3.9 } else { -8.0 }; // gap 4.0 needed to touch
            let mut s = OrientedBoxState::observed(
                i,
                i as f64 / RATE,
                Point2::new(x, 0.0),
                4.0,
                2.0,
                0.0,
                0.9,
            );
            s.speed_mps = Some(0.5);
            s.heading_rad = Some(0.0);
            follower_states.push(s);
        }
        let follower =
            Trajectory::new(2, VehicleClass::Car, Unit::Meter, RATE, follower_states).unwrap();
        let (kept, report) =
            ttc_overlap_filter(&table_of(vec![lead, follower]), &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 2, "removed: {:?}", report.removed);
    }

    #[test]
    fn overlap_tie_breaks_by_confidence_then_id() {
        let a = straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 20, 0.9);
        let b = straight(2, VehicleClass::Car, (0.1, 0.0), (5.0, 0.0), 20, 0.6);
        let (_, report) =
            ttc_overlap_filter(&table_of(vec![a, b]), &FilterConfig::default()).unwrap();
        assert_eq!(reasons(&report), vec![(2, FilterReason::TtcOverlap)]);

        let a = straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 20, 0.9);
        let b = straight(2, VehicleClass::Car, (0.1, 0.0), (5.0, 0.0), 20, 0.9);
        let (_, report) =
            ttc_overlap_filter(&table_of(vec![a, b]), &FilterConfig::default()).unwrap();
        assert_eq!(reasons(&report), vec![(2, FilterReason::TtcOverlap)], "higher id removed");
    }

    #[test]
    fn parallel_ghost_removed_by_zone_timing() {
        let car = straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 40, 0.9);
        let ghost = straight(2, VehicleClass::Car, (0.0, 0.3), (5.0, 0.0), 39, 0.7);
        let (kept, report) =
            dgt_duplicate_filter(&table_of(vec![car, ghost]), &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert!(kept.get(1).is_some());
        assert_eq!(report.removed[0].track_id, 2);
        assert_eq!(report.removed[0].reason, FilterReason::DgtDuplicate);
        assert_eq!(report.removed[0].partner_id, Some(1));
    }

    #[test]
    fn adjacent_lanes_three_meters_apart_kept() {
        let a = straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 40, 0.9);
        let b = straight(2, VehicleClass::Car, (0.0, 3.0), (5.0, 0.0), 40, 0.9);
        let (kept, report) =
            dgt_duplicate_filter(&table_of(vec![a, b]), &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 2, "removed: {:?}", report.removed);
        assert!(report.notes.is_empty());
    }

    #[test]
    fn forty_percent_overlap_kept_and_logged() {
        let car = straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 40, 0.9);
        // rides along for 16 of its 40 frames, then jumps to a far corridor
        let mut states = Vec::new();
        for i in 0..40i64 {
            let t = i as f64 / RATE;
            let (x, y) = if i < 16 { (0.1 + 5.0 * t, 0.1) } else { (5.0 * t, 80.0) };
            let mut s =
                OrientedBoxState::observed(i, t, Point2::new(x, y), 4.0, 2.0, 0.0, 0.7);
            s.speed_mps = Some(5.0);
            s.heading_rad = Some(0.0);
            states.push(s);
        }
        let ghost = Trajectory::new(2, VehicleClass::Car, Unit::Meter, RATE, states).unwrap();
        let (kept, report) =
            dgt_duplicate_filter(&table_of(vec![car, ghost]), &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(report.notes.len(), 1);
        assert!(report.notes[0].contains("overlap ratio 0.40"), "{}", report.notes[0]);
    }

    #[test]
    fn genuine_crossing_vehicles_survive_both_pair_stages() {
        // A eastbound through the origin early; B northbound through the
        // same area two seconds later — same space, different times
        let a = straight(1, VehicleClass::Car, (-20.0, 0.0), (10.0, 0.0), 40, 0.9);
        let b = straight(2, VehicleClass::Car, (0.0, -40.0), (0.0, 10.0), 40, 0.9);
        let table = table_of(vec![a, b]);
        let (t2, r2) = ttc_overlap_filter(&table, &FilterConfig::default()).unwrap();
        assert_eq!(t2.len(), 2, "{:?}", r2.removed);
        let (t3, r3) = dgt_duplicate_filter(&t2, &FilterConfig::default()).unwrap();
        assert_eq!(t3.len(), 2, "{:?}", r3.removed);
        // they do share a zone, but enter it at clearly different times
        let d = dgt(table.get(1).unwrap(), table.get(2).unwrap(), None).unwrap();
        assert!(d.zone.is_some());
        assert!(d.value_s.unwrap() > 1.0);
    }

    #[test]
    fn run_filters_is_deterministic_and_ordered() {
        let tracks = vec![
            straight(1, VehicleClass::Car, (0.0, 0.0), (5.0, 0.0), 40, 0.9),
            straight(2, VehicleClass::Car, (0.1, 0.1), (5.0, 0.0), 20, 0.8), // ghost of 1
            straight(3, VehicleClass::Car, (0.0, 20.0), (5.0, 0.0), 3, 0.9), // too short
            straight(4, VehicleClass::Car, (0.0, 40.0), (5.0, 0.0), 40, 0.9),
        ];
        let table = table_of(tracks.clone());
        let (kept_a, report_a) = run_filters(&table, &FilterConfig::default(), None).unwrap();
        let (kept_b, report_b) =
            run_filters(&table_of(tracks), &FilterConfig::default(), None).unwrap();
        assert_eq!(report_a, report_b);
        assert_eq!(kept_a.ids().collect::<Vec<_>>(), kept_b.ids().collect::<Vec<_>>());
        assert_eq!(kept_a.ids().collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(report_a.kept_count, 2);
    }
}
