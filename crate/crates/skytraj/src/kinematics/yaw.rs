//! Yaw refinement: anchor-run outlier replacement and heading-referenced
//! correction of the box orientation.

use crate::angle;
use crate::error::Result;
use crate::model::Trajectory;

/// Replace intermittent yaw outliers by interpolating between stable runs.
///
/// The sequence is unwrapped, then maximal runs whose successive steps stay
/// within `tol_stable_rad` and that span at least `k_stable` samples become
/// anchors (the run scan marks the same samples a forward plus a backward
/// traversal would). Samples outside every anchor that deviate from the
/// enclosing anchor values by more than `tol_outlier_rad` are replaced by the
/// straight interpolation between those anchor values. The returned sequence
/// is unwrapped: consecutive steps never jump by more than pi.
pub fn stabilize_yaw(
    yaws: &[f64],
    k_stable: usize,
    tol_stable_rad: f64,
    tol_outlier_rad: f64,
) -> Vec<f64> {
    let n = yaws.len();
    if n < 3 {
        return yaws.to_vec();
    }
    let y = angle::unwrap_sequence(yaws);

    // maximal stable runs as half-open index ranges
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for i in 1..=n {
        let broken = i == n || (y[i] - y[i - 1]).abs() > tol_stable_rad;
        if broken {
            if i - start >= k_stable {
                runs.push((start, i));
            }
            start = i;
        }
    }
    if runs.is_empty() {
        return y;
    }

    let mut out = y.clone();
    let in_run = |i: usize| runs.iter().any(|&(a, b)| (a..b).contains(&i));
    for i in 0..n {
        if in_run(i) {
            continue;
        }
        // nearest anchors on each side
        let prev = runs.iter().rev().find(|&&(_, b)| b <= i).map(|&(_, b)| b - 1);
        let next = runs.iter().find(|&&(a, _)| a > i).map(|&(a, _)| a);
        let (reference, deviates) = match (prev, next) {
            (Some(p), Some(q)) => {
                let u = (i - p) as f64 / (q - p) as f64;
                let r = y[p] + (y[q] - y[p]) * u;
                let dev = (y[i] - y[p]).abs() > tol_outlier_rad
                    && (y[i] - y[q]).abs() > tol_outlier_rad;
                (r, dev)
            }
            (Some(p), None) => (y[p], (y[i] - y[p]).abs() > tol_outlier_rad),
            (None, Some(q)) => (y[q], (y[i] - y[q]).abs() > tol_outlier_rad),
            (None, None) => unreachable!("runs is non-empty"),
        };
        if deviates {
            out[i] = reference;
        }
    }
    out
}

/// Align box yaw with the direction of travel where the vehicle is clearly
/// moving. Oriented boxes carry a pi ambiguity, so the flip closest to the
/// heading is adopted first; if the remaining deviation still exceeds
/// `max_dev_rad`, the yaw snaps to the heading. Below `speed_gate_mps` yaw is
/// left untouched.
pub fn correct_yaw_with_heading(
    traj: &Trajectory,
    speed_gate_mps: f64,
    max_dev_rad: f64,
) -> Result<Trajectory> {
    traj.map_states(|mut s| {
        let (speed, heading) = match (s.speed_mps, s.heading_rad) {
            (Some(v), Some(h)) => (v, h),
            _ => return s,
        };
        if speed <= speed_gate_mps {
            return s;
        }
        let direct = angle::distance(s.yaw_rad, heading);
        let flipped = angle::distance(s.yaw_rad + std::f64::consts::PI, heading);
        let mut yaw = if flipped < direct {
            angle::wrap(s.yaw_rad + std::f64::consts::PI)
        } else {
            s.yaw_rad
        };
        if angle::distance(yaw, heading) > max_dev_rad {
            yaw = heading;
        }
        s.yaw_rad = yaw;
        s
    })
}
