//! Scene-level statistics: arrival rates, conflict heatmaps, per-cycle
//! violation rates, and the combined summary used by the text report.

use std::collections::BTreeMap;

use nalgebra::Point2;

use crate::conflict::{self, ConflictEvent, ConflictKind};
use crate::error::{Error, Result};
use crate::ingest::SignalTimeline;
use crate::model::{ClassGroup, TrackTable};
use crate::semantic::{MovementKind, RouteAnnotation, ViolationEvent};

/// Heatmap cell edge, meters.
pub const HEATMAP_CELL_M: f64 = 1.0;

/// All four conflict kinds in a fixed, deterministic order.
pub const KINDS: [ConflictKind; 4] =
    [ConflictKind::RearEnd, ConflictKind::Sideswipe, ConflictKind::Angle, ConflictKind::HeadOn];

/// Average number of new trajectories of `group` per minute.
///
/// A trajectory "arrives" when its first frame falls inside the window
/// `[t0, t0 + duration_s]` (inclusive), where `t0` is the earliest first
/// frame in the whole table.
pub fn arrival_rate(table: &TrackTable, group: ClassGroup, duration_s: f64) -> Result<f64> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "arrival window must be positive, got {duration_s} s"
        )));
    }
    let t0 = table
        .iter()
        .filter_map(|t| t.first().map(|s| s.time_s))
        .fold(f64::INFINITY, f64::min);
    let count = table
        .iter()
        .filter(|t| t.group() == group)
        .filter_map(|t| t.first().map(|s| s.time_s))
        .filter(|&t| t >= t0 && t <= t0 + duration_s)
        .count();
    Ok(count as f64 / (duration_s / 60.0))
}

/// Conflict-count grid at 1 m resolution, one layer per conflict kind.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    /// Lower-left corner of cell (0, 0), meters.
    pub origin: Point2<f64>,
    pub cell_size_m: f64,
    /// Cells along x.
    pub width: usize,
    /// Cells along y.
    pub height: usize,
    /// Row-major counts (`iy * width + ix`), one layer per kind present.
    counts: BTreeMap<&'static str, Vec<u32>>,
}

impl HeatmapGrid {
    pub fn count(&self, kind: ConflictKind, ix: usize, iy: usize) -> u32 {
        self.counts
            .get(kind.name())
            .and_then(|layer| layer.get(iy * self.width + ix))
            .copied()
            .unwrap_or(0)
    }

    /// Row-major layer for one kind; empty slice when that kind was filtered.
    pub fn layer(&self, kind: ConflictKind) -> &[u32] {
        self.counts.get(kind.name()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn kind_total(&self, kind: ConflictKind) -> u64 {
        self.layer(kind).iter().map(|&c| c as u64).sum()
    }

    /// Events counted over all layers.
    pub fn total(&self) -> u64 {
        KINDS.iter().map(|&k| self.kind_total(k)).sum()
    }

    pub fn kinds(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.counts.keys().copied()
    }
}

/// Cell index along one axis with boundary points assigned to the cell with
/// the smaller index; `None` when outside `[0, cells]` in grid units.
fn cell_index(value: f64, origin: f64, cell: f64, cells: usize) -> Option<usize> {
    let u = (value - origin) / cell;
    if u < 0.0 || u > cells as f64 {
        return None;
    }
    // ceil - 1 sends an exact boundary down; the lower extent edge is cell 0
    let i = (u.ceil() as isize - 1).max(0) as usize;
    Some(i.min(cells - 1))
}

/// Count events into 1 m cells over `[min, max]`. `kinds = None` keeps all
/// four kinds; otherwise only the listed layers are counted.
///
/// Events outside the extent are ignored. An event exactly on a shared cell
/// edge or corner lands in the neighboring cell with the smaller indices.
pub fn grid_density(
    events: &[ConflictEvent],
    min: Point2<f64>,
    max: Point2<f64>,
    kinds: Option<&[ConflictKind]>,
) -> Result<HeatmapGrid> {
    if !(min.x.is_finite() && min.y.is_finite() && max.x.is_finite() && max.y.is_finite()) {
        return Err(Error::NonFinite { context: "heatmap extent".into() });
    }
    if max.x <= min.x || max.y <= min.y {
        return Err(Error::InvalidParameter(format!(
            "heatmap extent must have positive area, got ({}, {}) to ({}, {})",
            min.x, min.y, max.x, max.y
        )));
    }
    let width = ((max.x - min.x) / HEATMAP_CELL_M).ceil() as usize;
    let height = ((max.y - min.y) / HEATMAP_CELL_M).ceil() as usize;
    let keep: Vec<ConflictKind> = match kinds {
        Some(list) => KINDS.iter().copied().filter(|k| list.contains(k)).collect(),
        None => KINDS.to_vec(),
    };
    let mut counts: BTreeMap<&'static str, Vec<u32>> =
        keep.iter().map(|k| (k.name(), vec![0u32; width * height])).collect();
    for ev in events {
        if !keep.contains(&ev.kind) {
            continue;
        }
        let Some(ix) = cell_index(ev.location.x, min.x, HEATMAP_CELL_M, width) else { continue };
        let Some(iy) = cell_index(ev.location.y, min.y, HEATMAP_CELL_M, height) else { continue };
        counts.get_mut(ev.kind.name()).expect("kept kind")[iy * width + ix] += 1;
    }
    Ok(HeatmapGrid { origin: min, cell_size_m: HEATMAP_CELL_M, width, height, counts })
}

/// Violation rate for one signal cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRate {
    /// Cycle window `[start, end)` in whole seconds.
    pub start_s: i64,
    pub end_s: i64,
    /// Motor vehicles whose stop-line entry fell in this cycle.
    pub entrants: usize,
    pub straight_violations: usize,
    pub left_violations: usize,
    /// `violations / entrants`; `None` when the cycle had no entrants.
    pub straight_rate: Option<f64>,
    pub left_rate: Option<f64>,
}

/// Per-cycle violation rates for the straight and left movement families.
///
/// The denominator is every route with a stop-line entry in the cycle,
/// regardless of its movement; cycles without entrants report `None` rather
/// than a zero rate so sparse cycles remain distinguishable.
pub fn per_cycle_violation_rate(
    violations: &[ViolationEvent],
    routes: &BTreeMap<u64, RouteAnnotation>,
    timeline: &SignalTimeline,
) -> Result<Vec<CycleRate>> {
    let cycles = timeline.cycles();
    if cycles.is_empty() {
        return Err(Error::InvalidParameter(
            "signal timeline has no cycle boundaries (reference movement never turns green)"
                .into(),
        ));
    }
    let family = |track_id: u64| routes.get(&track_id).map(|r| r.kind);
    let mut out = Vec::with_capacity(cycles.len());
    for (start, end) in cycles {
        let in_cycle = |t: f64| t >= start as f64 && t < end as f64;
        let entrants = routes
            .values()
            .filter(|r| r.t_entry.map(|t| in_cycle(t)).unwrap_or(false))
            .count();
        let mut straight = 0usize;
        let mut left = 0usize;
        for v in violations.iter().filter(|v| in_cycle(v.t_violation)) {
            match family(v.track_id) {
                Some(MovementKind::Straight) => straight += 1,
                Some(MovementKind::Left) => left += 1,
                _ => {}
            }
        }
        let rate = |n: usize| (entrants > 0).then(|| n as f64 / entrants as f64);
        out.push(CycleRate {
            start_s: start,
            end_s: end,
            entrants,
            straight_violations: straight,
            left_violations: left,
            straight_rate: rate(straight),
            left_rate: rate(left),
        });
    }
    Ok(out)
}

/// Everything the text report and manifest need, precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub scene_id: String,
    pub duration_s: f64,
    pub mv_tracks: usize,
    pub vru_tracks: usize,
    pub mv_arrival_per_min: f64,
    pub vru_arrival_per_min: f64,
    pub conflicts_total: usize,
    pub conflicts_by_kind: BTreeMap<&'static str, usize>,
    /// Fraction of MVs in at least one conflict; `None` when the scene has
    /// no motor vehicles.
    pub conflict_mv_ratio: Option<f64>,
    /// Mean associated conflict-involved MVs per conflict pair.
    pub n_cmvcp: Option<f64>,
    /// Share of VRUs that passed within the association radius of a conflict.
    pub vru_context_share: Option<f64>,
    pub violations_total: usize,
    pub per_cycle: Vec<CycleRate>,
}

/// Assemble the summary. `duration_s` is the analysis window for arrival
/// rates (usually the recording length). The timeline is optional: scenes
/// without signal data skip the per-cycle series.
pub fn summarize(
    table: &TrackTable,
    events: &[ConflictEvent],
    violations: &[ViolationEvent],
    routes: &BTreeMap<u64, RouteAnnotation>,
    timeline: Option<&SignalTimeline>,
    duration_s: f64,
    association_radius_m: f64,
) -> Result<MetricsSummary> {
    let mv_tracks = table.iter().filter(|t| t.group() == ClassGroup::Mv).count();
    let vru_tracks = table.iter().filter(|t| t.group() == ClassGroup::Vru).count();
    let mut conflicts_by_kind: BTreeMap<&'static str, usize> =
        KINDS.iter().map(|k| (k.name(), 0)).collect();
    for ev in events {
        *conflicts_by_kind.get_mut(ev.kind.name()).expect("all kinds present") += 1;
    }
    let ratio = if mv_tracks > 0 {
        Some(conflict::conflict_mv_ratio(table, events)?)
    } else {
        None
    };
    let per_cycle = match timeline {
        Some(tl) => per_cycle_violation_rate(violations, routes, tl)?,
        None => Vec::new(),
    };
    Ok(MetricsSummary {
        scene_id: table.scene_id.clone(),
        duration_s,
        mv_tracks,
        vru_tracks,
        mv_arrival_per_min: arrival_rate(table, ClassGroup::Mv, duration_s)?,
        vru_arrival_per_min: arrival_rate(table, ClassGroup::Vru, duration_s)?,
        conflicts_total: events.len(),
        conflicts_by_kind,
        conflict_mv_ratio: ratio,
        n_cmvcp: conflict::n_cmvcp(events),
        vru_context_share: conflict::vru_context_share(table, events, association_radius_m)?,
        violations_total: violations.len(),
        per_cycle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SignalState;
    use crate::model::{OrientedBoxState, Trajectory, Unit, VehicleClass};
    use crate::semantic::ViolationKind;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeSet;

    const RATE: f64 = 10.0;

    fn track(id: u64, class: VehicleClass, first_frame: i64) -> Trajectory {
        let states = (first_frame..=first_frame + 10)
            .map(|f| OrientedBoxState {
                frame: f,
                time_s: f as f64 / RATE,
                center: nalgebra::Point2::new(f as f64, id as f64 * 10.0),
                length: 4.0,
                width: 2.0,
                yaw_rad: 0.0,
                heading_rad: Some(0.0),
                speed_mps: Some(10.0),
                accel_mps2: Some(0.0),
                confidence: Some(0.9),
                interpolated: false,
                source_px: None,
            })
            .collect();
        Trajectory::new(id, class, Unit::Meter, RATE, states).unwrap()
    }

    fn table(tracks: Vec<Trajectory>) -> TrackTable {
        let mut t = TrackTable::new("metrics-test", Unit::Meter, RATE).unwrap();
        for traj in tracks {
            t.insert(traj).unwrap();
        }
        t
    }

    // --- arrival_rate ---

    #[test]
    fn thirty_arrivals_in_a_minute_is_thirty_per_minute() {
        let tracks = (1..=30).map(|i| track(i, VehicleClass::Car, (i as i64 - 1) * 19)).collect();
        let t = table(tracks);
        // first frames 0..=551, all within 60 s
        assert_abs_diff_eq!(arrival_rate(&t, ClassGroup::Mv, 60.0).unwrap(), 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(arrival_rate(&t, ClassGroup::Vru, 60.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn staggered_schedule_hits_exact_rate() {
        // 37 pedestrians arriving at distinct frames inside one minute.
        let tracks =
            (1..=37).map(|i| track(i, VehicleClass::Pedestrian, (i as i64 - 1) * 16)).collect();
        let t = table(tracks);
        assert_abs_diff_eq!(
            arrival_rate(&t, ClassGroup::Vru, 60.0).unwrap(),
            37.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn window_scales_the_rate_and_rejects_zero() {
        // 5 arrivals in 30 s -> 10 per minute.
        let tracks = (1..=5).map(|i| track(i, VehicleClass::Car, (i as i64 - 1) * 10)).collect();
        let t = table(tracks);
        assert_abs_diff_eq!(arrival_rate(&t, ClassGroup::Mv, 30.0).unwrap(), 10.0, epsilon = 1e-12);
        assert!(arrival_rate(&t, ClassGroup::Mv, 0.0).is_err());
        assert!(arrival_rate(&t, ClassGroup::Mv, -5.0).is_err());
    }

    #[test]
    fn late_arrivals_fall_outside_the_window() {
        // one track starts at t = 0, another at t = 90 s; 60 s window keeps one
        let t = table(vec![
            track(1, VehicleClass::Car, 0),
            track(2, VehicleClass::Car, 900),
        ]);
        assert_abs_diff_eq!(arrival_rate(&t, ClassGroup::Mv, 60.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    // --- grid_density ---

    fn event_at(x: f64, y: f64, kind: ConflictKind) -> ConflictEvent {
        ConflictEvent {
            pair: (1, 2),
            frame_min_ttc: 0,
            t_min_ttc: 0.0,
            min_ttc_s: 1.0,
            dgt_s: 1.0,
            location: Point2::new(x, y),
            delta_psi_deg: 0.0,
            kind,
            associated_ids: BTreeSet::new(),
        }
    }

    #[test]
    fn three_events_in_one_cell_count_three() {
        let events = vec![
            event_at(0.2, 0.3, ConflictKind::Angle),
            event_at(0.7, 0.9, ConflictKind::Angle),
            event_at(0.5, 0.5, ConflictKind::Angle),
        ];
        let g =
            grid_density(&events, Point2::new(0.0, 0.0), Point2::new(10.0, 10.0), None).unwrap();
        assert_eq!(g.width, 10);
        assert_eq!(g.height, 10);
        assert_eq!(g.count(ConflictKind::Angle, 0, 0), 3);
        assert_eq!(g.total(), 3);
    }

    #[test]
    fn corner_point_goes_to_the_lower_cell() {
        // (3.0, 4.0) is the shared corner of four cells; the convention picks
        // cell (2, 3), the smaller indices.
        let events = vec![event_at(3.0, 4.0, ConflictKind::RearEnd)];
        let g =
            grid_density(&events, Point2::new(0.0, 0.0), Point2::new(10.0, 10.0), None).unwrap();
        assert_eq!(g.count(ConflictKind::RearEnd, 2, 3), 1);
        assert_eq!(g.total(), 1);
        // the extent's own lower-left corner still lands in cell (0, 0)
        let g0 = grid_density(
            &[event_at(0.0, 0.0, ConflictKind::RearEnd)],
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
            None,
        )
        .unwrap();
        assert_eq!(g0.count(ConflictKind::RearEnd, 0, 0), 1);
        // and the upper-right corner in the last cell
        let g1 = grid_density(
            &[event_at(10.0, 10.0, ConflictKind::RearEnd)],
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
            None,
        )
        .unwrap();
        assert_eq!(g1.count(ConflictKind::RearEnd, 9, 9), 1);
    }

    #[test]
    fn out_of_extent_events_are_ignored_and_kinds_filtered() {
        let events = vec![
            event_at(5.0, 5.0, ConflictKind::Angle),
            event_at(50.0, 5.0, ConflictKind::Angle), // outside
            event_at(5.0, 5.0, ConflictKind::HeadOn), // filtered out below
        ];
        let g = grid_density(
            &events,
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
            Some(&[ConflictKind::Angle]),
        )
        .unwrap();
        assert_eq!(g.total(), 1);
        assert!(g.layer(ConflictKind::HeadOn).is_empty());
        assert_eq!(g.kinds().collect::<Vec<_>>(), vec!["angle"]);
    }

    #[test]
    fn uniform_events_spread_within_poisson_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 2000usize;
        let events: Vec<ConflictEvent> = (0..n)
            .map(|_| {
                event_at(rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0, ConflictKind::Sideswipe)
            })
            .collect();
        let g =
            grid_density(&events, Point2::new(0.0, 0.0), Point2::new(10.0, 10.0), None).unwrap();
        assert_eq!(g.total() as usize, n, "every uniform draw lands in the extent");
        // lambda = 20 per cell; 6 sigma keeps the flake probability negligible
        let lambda = n as f64 / 100.0;
        let bound = 6.0 * lambda.sqrt();
        for iy in 0..g.height {
            for ix in 0..g.width {
                let c = g.count(ConflictKind::Sideswipe, ix, iy) as f64;
                assert!(
                    (c - lambda).abs() <= bound,
                    "cell ({ix},{iy}) count {c} outside {lambda} +- {bound}"
                );
            }
        }
    }

    #[test]
    fn degenerate_extent_is_rejected() {
        assert!(grid_density(&[], Point2::new(0.0, 0.0), Point2::new(0.0, 10.0), None).is_err());
        assert!(grid_density(&[], Point2::new(0.0, 0.0), Point2::new(10.0, f64::NAN), None)
            .is_err());
    }

    // --- per_cycle_violation_rate ---

    fn route(track_id: u64, kind: MovementKind, t_entry: Option<f64>) -> RouteAnnotation {
        RouteAnnotation {
            track_id,
            entry_edge: Some("north".into()),
            exit_edge: Some("south".into()),
            movement_id: Some("NS".into()),
            kind,
            t_entry,
            t_exit: t_entry.map(|t| t + 3.0),
        }
    }

    fn violation(track_id: u64, t: f64) -> ViolationEvent {
        ViolationEvent {
            track_id,
            movement_id: "NS".into(),
            t_violation: t,
            kind: ViolationKind::RedLightRunning,
            signal_state_at_entry: SignalState::Red,
        }
    }

    /// Three cycles: [0,10), [10,20), [20,30).
    fn three_cycle_timeline() -> SignalTimeline {
        let entries: Vec<(i64, String, SignalState)> = (0..=29)
            .map(|t| {
                let s = match t % 10 {
                    0..=4 => SignalState::Green,
                    _ => SignalState::Red,
                };
                (t, "NS".to_string(), s)
            })
            .collect();
        SignalTimeline::from_entries(&entries).unwrap()
    }

    #[test]
    fn rates_match_hand_computed_table() {
        let tl = three_cycle_timeline();
        let mut routes = BTreeMap::new();
        // cycle 0: ten entrants (ids 1..=10)
        for id in 1..=10u64 {
            routes.insert(id, route(id, MovementKind::Straight, Some(id as f64 * 0.5)));
        }
        // cycle 1: none. cycle 2: four entrants, two of them left turns.
        for (i, id) in (11..=14u64).enumerate() {
            let kind = if i < 2 { MovementKind::Left } else { MovementKind::Straight };
            routes.insert(id, route(id, kind, Some(21.0 + i as f64)));
        }
        let violations = vec![
            violation(3, 3.0),   // cycle 0, straight
            violation(13, 23.0), // cycle 2, straight
            violation(11, 21.0), // cycle 2, left
            violation(12, 22.0), // cycle 2, left
        ];
        let rates = per_cycle_violation_rate(&violations, &routes, &tl).unwrap();
        assert_eq!(rates.len(), 3);

        assert_eq!(rates[0].entrants, 10);
        assert_abs_diff_eq!(rates[0].straight_rate.unwrap(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(rates[0].left_rate.unwrap(), 0.0, epsilon = 1e-12);

        assert_eq!(rates[1].entrants, 0);
        assert!(rates[1].straight_rate.is_none(), "zero entrants must be absent, not zero");
        assert!(rates[1].left_rate.is_none());

        assert_eq!(rates[2].entrants, 4);
        assert_abs_diff_eq!(rates[2].straight_rate.unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(rates[2].left_rate.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn timeline_without_green_reference_errors() {
        let entries: Vec<(i64, String, SignalState)> =
            (0..=5).map(|t| (t, "NS".to_string(), SignalState::Red)).collect();
        let tl = SignalTimeline::from_entries(&entries).unwrap();
        assert!(per_cycle_violation_rate(&[], &BTreeMap::new(), &tl).is_err());
    }

    // --- summarize ---

    #[test]
    fn summary_combines_the_pieces() {
        let t = table(vec![
            track(1, VehicleClass::Car, 0),
            track(2, VehicleClass::Car, 5),
            track(3, VehicleClass::Car, 9),
            track(4, VehicleClass::Car, 12),
            track(5, VehicleClass::Pedestrian, 3),
        ]);
        let mut ev = event_at(1.0, 1.0, ConflictKind::Angle);
        ev.pair = (1, 2);
        ev.frame_min_ttc = 5;
        let routes: BTreeMap<u64, RouteAnnotation> = (1..=4u64)
            .map(|id| (id, route(id, MovementKind::Straight, Some(1.0 + id as f64))))
            .collect();
        let violations = vec![violation(2, 3.0)];
        let tl = three_cycle_timeline();
        let s =
            summarize(&t, &[ev], &violations, &routes, Some(&tl), 60.0, 10.0).unwrap();
        assert_eq!(s.mv_tracks, 4);
        assert_eq!(s.vru_tracks, 1);
        assert_abs_diff_eq!(s.mv_arrival_per_min, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.vru_arrival_per_min, 1.0, epsilon = 1e-12);
        assert_eq!(s.conflicts_total, 1);
        assert_eq!(s.conflicts_by_kind["angle"], 1);
        assert_eq!(s.conflicts_by_kind["rear_end"], 0);
        assert_abs_diff_eq!(s.conflict_mv_ratio.unwrap(), 0.5, epsilon = 1e-12);
        assert!(s.n_cmvcp.is_some());
        // pedestrian track 5 wanders near the event location at frame 5
        assert!(s.vru_context_share.is_some());
        assert_eq!(s.violations_total, 1);
        assert_eq!(s.per_cycle.len(), 3);
    }
}
