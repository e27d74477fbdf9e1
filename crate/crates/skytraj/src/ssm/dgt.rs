//! Dynamic gap time: temporal separation at the shared conflict zone.
//!
//! The conflict zone of two tracks is the intersection of their swept
//! footprints over a time window. Each track's entry time is the first frame
//! whose box touches the zone; the gap is the absolute difference of the two
//! entries. A pair with no zone has no gap.

use crate::error::{Error, Result};
use crate::model::Trajectory;
use crate::ssm::obb::Obb;
use crate::ssm::region::{swept_region, Region};

#[derive(Debug, Clone)]
pub struct DgtResult {
    /// Shared conflict zone, when one exists.
    pub zone: Option<Region>,
    pub t_enter_a: Option<f64>,
    pub t_enter_b: Option<f64>,
    /// `|t_enter_a - t_enter_b|` in seconds.
    pub value_s: Option<f64>,
}

impl DgtResult {
    fn empty() -> Self {
        DgtResult { zone: None, t_enter_a: None, t_enter_b: None, value_s: None }
    }
}

/// Shared time window of two trajectories, clipped to `window` when given.
pub fn shared_window(
    a: &Trajectory,
    b: &Trajectory,
    window: Option<(f64, f64)>,
) -> Result<(f64, f64)> {
    let (a0, a1) = a.time_span().ok_or(Error::EmptyTrajectory)?;
    let (b0, b1) = b.time_span().ok_or(Error::EmptyTrajectory)?;
    let mut t0 = a0.max(b0);
    let mut t1 = a1.min(b1);
    if let Some((w0, w1)) = window {
        t0 = t0.max(w0);
        t1 = t1.min(w1);
    }
    if t1 < t0 {
        return Err(Error::NoSharedWindow { a: a.track_id, b: b.track_id });
    }
    Ok((t0, t1))
}

/// Dynamic gap time over the overlapping coverage of `a` and `b` (optionally
/// clipped to `window`). Requires the tracks to share a time window.
pub fn dgt(a: &Trajectory, b: &Trajectory, window: Option<(f64, f64)>) -> Result<DgtResult> {
    let (t0, t1) = shared_window(a, b, window)?;
    let swept_a = swept_region(a, t0, t1)?;
    let swept_b = swept_region(b, t0, t1)?;
    let zone = swept_a.intersection(&swept_b);
    if zone.is_empty() {
        return Ok(DgtResult::empty());
    }
    let t_enter_a = first_entry(a, &zone, t0, t1)?;
    let t_enter_b = first_entry(b, &zone, t0, t1)?;
    let value_s = match (t_enter_a, t_enter_b) {
        (Some(ta), Some(tb)) => Some((ta - tb).abs()),
        _ => None,
    };
    Ok(DgtResult { zone: Some(zone), t_enter_a, t_enter_b, value_s })
}

fn first_entry(traj: &Trajectory, zone: &Region, t0: f64, t1: f64) -> Result<Option<f64>> {
    for s in traj.states() {
        if s.time_s < t0 {
            continue;
        }
        if s.time_s > t1 {
            break;
        }
        if zone.intersects_box(&Obb::from_state(s)?) {
            return Ok(Some(s.time_s));
        }
    }
    Ok(None)
}
