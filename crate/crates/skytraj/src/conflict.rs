//! Motor-vehicle conflict extraction and context metrics.
//!
//! A conflict is an unordered pair of motor vehicles whose predicted paths
//! came dangerously close (minimum time-to-collision at or below a threshold)
//! *and* whose actual paths occupied shared road space close in time (dynamic
//! gap time at or below a second threshold). The two-stage rule discards
//! kinematically alarming pairs that were in fact separated by infrastructure:
//! a closing TTC across a median never produces a shared swept zone, so the
//! gap-time check drops it.
//!
//! Pipeline: [`min_ttc_scan`] finds per-pair TTC minima (one per episode),
//! [`validate_conflicts`] confirms each against the dynamic gap time and
//! classifies the conflict angle, [`attach_associated`] fills the nearby
//! conflict-involved neighbor sets. [`extract_conflicts`] runs all three.

use std::collections::BTreeSet;

use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::model::{ClassGroup, TrackTable, Trajectory, Unit};
use crate::ssm::{candidate_pairs, dgt, ttc, Obb, TtcValue};

/// Slack applied at inclusive thresholds so values that land exactly on a
/// boundary (common with frame-quantized data) are not lost to float noise.
const BOUNDARY_EPS: f64 = 1e-9;

/// Thresholds and classification bands for conflict extraction.
///
/// Both time thresholds are inclusive. The angle bands partition `[0, 180]`
/// degrees: `rear_end [0, rear_end_max)`, `sideswipe [rear_end_max,
/// sideswipe_max)`, `angle [sideswipe_max, angle_max)`, `head_on [angle_max,
/// 180]`. Every exported artifact should echo these values in its header so
/// results remain reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConflictConfig {
    /// Maximum minimum-TTC for a candidate pair, seconds (inclusive).
    pub max_ttc_s: f64,
    /// Maximum dynamic gap time for a validated event, seconds (inclusive).
    pub max_dgt_s: f64,
    /// A pair's interaction splits into separate episodes when its TTC stays
    /// above `max_ttc_s` for longer than this many seconds.
    pub episode_gap_s: f64,
    /// Radius for the associated-object and VRU-context queries, meters.
    pub association_radius_m: f64,
    /// Pairs whose boxes never come within this distance are pruned before
    /// any TTC is computed, meters.
    pub scan_radius_m: f64,
    /// Upper edge (exclusive) of the rear-end band, degrees.
    pub rear_end_max_deg: f64,
    /// Upper edge (exclusive) of the sideswipe band, degrees.
    pub sideswipe_max_deg: f64,
    /// Upper edge (exclusive) of the angle band, degrees.
    pub angle_max_deg: f64,
}

impl Default for ConflictConfig {
    fn default() -> Self {
        ConflictConfig {
            max_ttc_s: 2.0,
            max_dgt_s: 4.0,
            episode_gap_s: 3.0,
            association_radius_m: 10.0,
            scan_radius_m: 50.0,
            rear_end_max_deg: 30.0,
            sideswipe_max_deg: 85.0,
            angle_max_deg: 150.0,
        }
    }
}

impl ConflictConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.max_ttc_s, "max_ttc_s"),
            (self.max_dgt_s, "max_dgt_s"),
            (self.association_radius_m, "association_radius_m"),
            (self.scan_radius_m, "scan_radius_m"),
        ];
        for (v, name) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.episode_gap_s.is_finite() || self.episode_gap_s < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "episode_gap_s must be non-negative, got {}",
                self.episode_gap_s
            )));
        }
        let bands = [self.rear_end_max_deg, self.sideswipe_max_deg, self.angle_max_deg];
        if bands.iter().any(|b| !b.is_finite())
            || !(0.0 < bands[0] && bands[0] < bands[1] && bands[1] < bands[2] && bands[2] < 180.0)
        {
            return Err(Error::InvalidParameter(format!(
                "classification bands must satisfy 0 < rear_end < sideswipe < angle < 180, \
                 got {} / {} / {}",
                bands[0], bands[1], bands[2]
            )));
        }
        Ok(())
    }
}

/// Conflict type by angle between the two yaw directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    RearEnd,
    Sideswipe,
    Angle,
    HeadOn,
}

impl ConflictKind {
    pub fn name(self) -> &'static str {
        match self {
            ConflictKind::RearEnd => "rear_end",
            ConflictKind::Sideswipe => "sideswipe",
            ConflictKind::Angle => "angle",
            ConflictKind::HeadOn => "head_on",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "rear_end" => Ok(ConflictKind::RearEnd),
            "sideswipe" => Ok(ConflictKind::Sideswipe),
            "angle" => Ok(ConflictKind::Angle),
            "head_on" => Ok(ConflictKind::HeadOn),
            other => Err(Error::InvalidParameter(format!("unknown conflict kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Classify a folded yaw difference in degrees into a conflict kind.
pub fn classify(delta_psi_deg: f64, cfg: &ConflictConfig) -> Result<ConflictKind> {
    if !delta_psi_deg.is_finite() || !(0.0..=180.0).contains(&delta_psi_deg) {
        return Err(Error::InvalidParameter(format!(
            "conflict angle must lie in [0, 180] degrees, got {delta_psi_deg}"
        )));
    }
    Ok(if delta_psi_deg < cfg.rear_end_max_deg {
        ConflictKind::RearEnd
    } else if delta_psi_deg < cfg.sideswipe_max_deg {
        ConflictKind::Sideswipe
    } else if delta_psi_deg < cfg.angle_max_deg {
        ConflictKind::Angle
    } else {
        ConflictKind::HeadOn
    })
}

/// A per-pair, per-episode TTC minimum found by [`min_ttc_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtcCandidate {
    /// Track ids, smaller first.
    pub pair: (u64, u64),
    /// Frame at which the minimum occurred.
    pub frame_min_ttc: i64,
    /// Time of that frame, seconds.
    pub t_min_ttc: f64,
    /// Minimum finite TTC over the episode, seconds.
    pub min_ttc_s: f64,
}

/// A validated, classified motor-vehicle conflict.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictEvent {
    /// Track ids, smaller first; both motor vehicles.
    pub pair: (u64, u64),
    /// Frame at which the minimum TTC occurred.
    pub frame_min_ttc: i64,
    /// Time of the minimum TTC, seconds.
    pub t_min_ttc: f64,
    /// Minimum TTC over the episode, seconds; at most the configured maximum.
    pub min_ttc_s: f64,
    /// Dynamic gap time of the pair, seconds; at most the configured maximum.
    pub dgt_s: f64,
    /// Midpoint of the two box centers at `t_min_ttc`, meters.
    pub location: Point2<f64>,
    /// Yaw difference at `t_min_ttc`, folded to `[0, 180]` degrees.
    pub delta_psi_deg: f64,
    pub kind: ConflictKind,
    /// Other conflict-involved motor vehicles near the pair at `t_min_ttc`.
    pub associated_ids: BTreeSet<u64>,
}

fn require_meters(table: &TrackTable) -> Result<()> {
    if table.unit != Unit::Meter {
        return Err(Error::UnitMismatch {
            expected: Unit::Meter.name(),
            got: table.unit.name(),
        });
    }
    Ok(())
}

/// Scan one pair's shared frames for per-episode TTC minima.
///
/// A frame is *active* when the pair's TTC is finite and at or below the
/// threshold; already-overlapping boxes extend an episode but cannot supply
/// its minimum (the minimum is defined over finite TTC only). Two active
/// frames more than `episode_gap_s` apart belong to different episodes.
fn pair_episode_minima(
    a: &Trajectory,
    b: &Trajectory,
    cfg: &ConflictConfig,
) -> Result<Vec<TtcCandidate>> {
    let pair = (a.track_id.min(b.track_id), a.track_id.max(b.track_id));
    let mut episodes: Vec<TtcCandidate> = Vec::new();
    let mut current: Option<TtcCandidate> = None;
    let mut last_active_t = f64::NEG_INFINITY;

    for sa in a.states() {
        let Some(sb) = b.state_at_frame(sa.frame) else { continue };
        let va = sa.velocity().ok_or(Error::VelocitiesMissing { track_id: a.track_id })?;
        let vb = sb.velocity().ok_or(Error::VelocitiesMissing { track_id: b.track_id })?;
        let result = ttc(&Obb::from_state(sa)?, va, &Obb::from_state(sb)?, vb)?;
        let value = match result.value {
            TtcValue::Finite(v) if v <= cfg.max_ttc_s + BOUNDARY_EPS => Some(v),
            TtcValue::Overlap => None, // active, but not a finite minimum
            _ => continue,
        };
        if sa.time_s - last_active_t > cfg.episode_gap_s + BOUNDARY_EPS {
            episodes.extend(current.take());
        }
        last_active_t = sa.time_s;
        if let Some(v) = value {
            let better = current.map_or(true, |c| v < c.min_ttc_s);
            if better {
                current = Some(TtcCandidate {
                    pair,
                    frame_min_ttc: sa.frame,
                    t_min_ttc: sa.time_s,
                    min_ttc_s: v,
                });
            }
        }
    }
    episodes.extend(current);
    Ok(episodes)
}

/// Find every motor-vehicle pair whose minimum finite TTC drops to the
/// threshold or below, one candidate per episode.
///
/// Pairs that never come within `scan_radius_m` of each other are pruned
/// before any TTC is evaluated. Requires meter-space trajectories with
/// velocity estimates. Results are sorted by `(t_min_ttc, pair)`.
pub fn min_ttc_scan(table: &TrackTable, cfg: &ConflictConfig) -> Result<Vec<TtcCandidate>> {
    require_meters(table)?;
    cfg.validate()?;
    let pairs: Vec<(&Trajectory, &Trajectory)> = candidate_pairs(table, cfg.scan_radius_m)
        .into_iter()
        .filter_map(|(ia, ib)| Some((table.get(ia)?, table.get(ib)?)))
        .filter(|(a, b)| a.group() == ClassGroup::Mv && b.group() == ClassGroup::Mv)
        .collect();
    let per_pair: Vec<Result<Vec<TtcCandidate>>> =
        pairs.par_iter().map(|(a, b)| pair_episode_minima(a, b, cfg)).collect();
    let mut out = Vec::new();
    for r in per_pair {
        out.extend(r?);
    }
    out.sort_by(|p, q| p.t_min_ttc.total_cmp(&q.t_min_ttc).then(p.pair.cmp(&q.pair)));
    Ok(out)
}

fn member_states<'t>(
    table: &'t TrackTable,
    pair: (u64, u64),
    frame: i64,
) -> Result<(&'t crate::model::OrientedBoxState, &'t crate::model::OrientedBoxState)> {
    let fetch = |id: u64| -> Result<&'t crate::model::OrientedBoxState> {
        table
            .get(id)
            .ok_or_else(|| Error::InvalidParameter(format!("track {id} not in table")))?
            .state_at_frame(frame)
            .ok_or(Error::GapNotInterpolated { track_id: id, frame })
    };
    Ok((fetch(pair.0)?, fetch(pair.1)?))
}

/// Confirm TTC candidates against the dynamic gap time and classify them.
///
/// A candidate survives only when the pair's swept paths share a zone and the
/// gap between their zone-entry times is at most `max_dgt_s` (inclusive); a
/// pair with no shared zone was never on a collision course in space and is
/// dropped. Survivors get their location, conflict angle, and kind filled in;
/// `associated_ids` is left empty for [`attach_associated`].
pub fn validate_conflicts(
    candidates: &[TtcCandidate],
    table: &TrackTable,
    cfg: &ConflictConfig,
) -> Result<Vec<ConflictEvent>> {
    require_meters(table)?;
    cfg.validate()?;
    let mut events = Vec::new();
    for cand in candidates {
        let missing =
            |id: u64| Error::InvalidParameter(format!("candidate references unknown track {id}"));
        let a = table.get(cand.pair.0).ok_or_else(|| missing(cand.pair.0))?;
        let b = table.get(cand.pair.1).ok_or_else(|| missing(cand.pair.1))?;
        let gap = dgt(a, b, None)?;
        let Some(dgt_s) = gap.value_s else { continue };
        if dgt_s > cfg.max_dgt_s + BOUNDARY_EPS {
            continue;
        }
        let (sa, sb) = member_states(table, cand.pair, cand.frame_min_ttc)?;
        let delta_psi_deg = angle::fold_deg(sa.yaw_rad, sb.yaw_rad);
        events.push(ConflictEvent {
            pair: cand.pair,
            frame_min_ttc: cand.frame_min_ttc,
            t_min_ttc: cand.t_min_ttc,
            min_ttc_s: cand.min_ttc_s,
            dgt_s,
            location: nalgebra::center(&sa.center, &sb.center),
            delta_psi_deg,
            kind: classify(delta_psi_deg, cfg)?,
            associated_ids: BTreeSet::new(),
        });
    }
    events.sort_by(|p, q| p.t_min_ttc.total_cmp(&q.t_min_ttc).then(p.pair.cmp(&q.pair)));
    Ok(events)
}

/// The conflict-involved motor vehicles (excluding the pair itself) whose
/// center at the event's `t_min_ttc` lies within `radius_m` of either pair
/// member's center. Membership requires the neighbor to appear in some event
/// of `all_events`; a bystander five meters away does not count.
pub fn associated_objects(
    ev: &ConflictEvent,
    all_events: &[ConflictEvent],
    table: &TrackTable,
    radius_m: f64,
) -> Result<BTreeSet<u64>> {
    let involved: BTreeSet<u64> =
        all_events.iter().flat_map(|e| [e.pair.0, e.pair.1]).collect();
    let (sa, sb) = member_states(table, ev.pair, ev.frame_min_ttc)?;
    let mut out = BTreeSet::new();
    for traj in table.iter() {
        let id = traj.track_id;
        if id == ev.pair.0 || id == ev.pair.1 || !involved.contains(&id) {
            continue;
        }
        if traj.group() != ClassGroup::Mv {
            continue;
        }
        let Some(s) = traj.state_at_frame(ev.frame_min_ttc) else { continue };
        let near = (s.center - sa.center).norm() <= radius_m
            || (s.center - sb.center).norm() <= radius_m;
        if near {
            out.insert(id);
        }
    }
    Ok(out)
}

/// Fill `associated_ids` on every event using the configured radius.
pub fn attach_associated(
    events: &mut Vec<ConflictEvent>,
    table: &TrackTable,
    radius_m: f64,
) -> Result<()> {
    let snapshot = events.clone();
    for ev in events.iter_mut() {
        ev.associated_ids = associated_objects(ev, &snapshot, table, radius_m)?;
    }
    Ok(())
}

/// Run the full conflict pipeline: scan, validate, classify, associate.
/// Events come back sorted by `(t_min_ttc, pair)`.
pub fn extract_conflicts(table: &TrackTable, cfg: &ConflictConfig) -> Result<Vec<ConflictEvent>> {
    let candidates = min_ttc_scan(table, cfg)?;
    let mut events = validate_conflicts(&candidates, table, cfg)?;
    attach_associated(&mut events, table, cfg.association_radius_m)?;
    Ok(events)
}

/// Fraction of motor vehicles involved in at least one conflict.
///
/// Errors when the table holds no motor vehicles — the ratio is undefined.
pub fn conflict_mv_ratio(table: &TrackTable, events: &[ConflictEvent]) -> Result<f64> {
    let mv_total = table.iter().filter(|t| t.group() == ClassGroup::Mv).count();
    if mv_total == 0 {
        return Err(Error::InvalidParameter(
            "conflict_mv_ratio needs at least one motor vehicle".into(),
        ));
    }
    let involved: BTreeSet<u64> = events.iter().flat_map(|e| [e.pair.0, e.pair.1]).collect();
    Ok(involved.len() as f64 / mv_total as f64)
}

/// Mean number of associated conflict-involved vehicles per conflict pair.
/// `None` when there are no events.
pub fn n_cmvcp(events: &[ConflictEvent]) -> Option<f64> {
    if events.is_empty() {
        return None;
    }
    let total: usize = events.iter().map(|e| e.associated_ids.len()).sum();
    Some(total as f64 / events.len() as f64)
}

/// Share of vulnerable road users that came within `radius_m` of a conflict
/// pair at its `t_min_ttc`. `None` when the scene has no VRUs.
pub fn vru_context_share(
    table: &TrackTable,
    events: &[ConflictEvent],
    radius_m: f64,
) -> Result<Option<f64>> {
    let vrus: Vec<&Trajectory> = table.iter().filter(|t| t.group() == ClassGroup::Vru).collect();
    if vrus.is_empty() {
        return Ok(None);
    }
    let mut near: BTreeSet<u64> = BTreeSet::new();
    for ev in events {
        let (sa, sb) = member_states(table, ev.pair, ev.frame_min_ttc)?;
        for vru in &vrus {
            if near.contains(&vru.track_id) {
                continue;
            }
            let Some(s) = vru.state_at_frame(ev.frame_min_ttc) else { continue };
            if (s.center - sa.center).norm() <= radius_m
                || (s.center - sb.center).norm() <= radius_m
            {
                near.insert(vru.track_id);
            }
        }
    }
    Ok(Some(near.len() as f64 / vrus.len() as f64))
}
