//! Kinematic gap filling.
//!
//! Missing frames between two observed states are filled with a cubic Hermite
//! blend that honors positions and the linear velocities estimated from the
//! bracketing valid points, so constant-velocity motion is reproduced exactly
//! and curved motion bends plausibly. Yaw is filled the same way on the
//! unwrapped angle with angular velocities. When a velocity estimate is
//! unavailable the fill degrades to linear, and to nearest-neighbor copies if
//! even the gap geometry is degenerate. Gaps longer than `max_gap_frames`
//! split the trajectory instead.

use nalgebra::Vector2;

use crate::angle;
use crate::error::Result;
use crate::model::{OrientedBoxState, Trajectory};

/// Result of filling one trajectory.
#[derive(Debug, Clone)]
pub struct InterpolationOutcome {
    /// The filled trajectory, split where a gap exceeded the limit. Pieces
    /// keep the source track id; callers re-key extra pieces.
    pub pieces: Vec<Trajectory>,
    /// Number of states created.
    pub filled: usize,
}

impl InterpolationOutcome {
    pub fn split(&self) -> bool {
        self.pieces.len() > 1
    }
}

fn hermite(p0: f64, m0: f64, p1: f64, m1: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * p0
        + (u3 - 2.0 * u2 + u) * m0
        + (-2.0 * u3 + 3.0 * u2) * p1
        + (u3 - u2) * m1
}

/// Velocity estimate for the state at `idx` using its neighbor on one side;
/// falls back to the straight-line velocity across the gap itself.
fn side_velocity(
    states: &[OrientedBoxState],
    idx: usize,
    neighbor: Option<usize>,
    gap_velocity: Vector2<f64>,
) -> Vector2<f64> {
    if let Some(j) = neighbor {
        let dt = states[idx].time_s - states[j].time_s;
        if dt.abs() > 1e-12 {
            let v = (states[idx].center - states[j].center) / dt;
            if v.x.is_finite() && v.y.is_finite() {
                return v;
            }
        }
    }
    gap_velocity
}

fn side_yaw_rate(
    yaw_unwrapped: &[f64],
    times: &[f64],
    idx: usize,
    neighbor: Option<usize>,
    gap_rate: f64,
) -> f64 {
    if let Some(j) = neighbor {
        let dt = times[idx] - times[j];
        if dt.abs() > 1e-12 {
            let w = (yaw_unwrapped[idx] - yaw_unwrapped[j]) / dt;
            if w.is_finite() {
                return w;
            }
        }
    }
    gap_rate
}

/// Fill interior gaps of at most `max_gap_frames` missing frames; larger gaps
/// split the trajectory into separate pieces.
pub fn kinematic_interpolate(traj: &Trajectory, max_gap_frames: i64) -> Result<InterpolationOutcome> {
    let states = traj.states();
    if states.len() <= 1 {
        return Ok(InterpolationOutcome { pieces: vec![traj.clone()], filled: 0 });
    }
    let times: Vec<f64> = states.iter().map(|s| s.time_s).collect();
    let yaw_unwrapped = angle::unwrap_sequence(&states.iter().map(|s| s.yaw_rad).collect::<Vec<_>>());

    let mut pieces: Vec<Vec<OrientedBoxState>> = vec![vec![states[0].clone()]];
    let mut filled = 0usize;

    for i in 0..states.len() - 1 {
        let a = &states[i];
        let b = &states[i + 1];
        let missing = b.frame - a.frame - 1;
        if missing > max_gap_frames {
            pieces.push(Vec::new());
        } else if missing > 0 {
            let dt_gap = b.time_s - a.time_s;
            let degenerate = !(dt_gap.is_finite() && dt_gap > 0.0);
            let gap_v = if degenerate {
                Vector2::zeros()
            } else {
                (b.center - a.center) / dt_gap
            };
            let gap_w = if degenerate {
                0.0
            } else {
                (yaw_unwrapped[i + 1] - yaw_unwrapped[i]) / dt_gap
            };
            let va = side_velocity(states, i, i.checked_sub(1), gap_v);
            let vb = side_velocity(states, i + 1, (i + 2 < states.len()).then_some(i + 2), gap_v);
            let wa = side_yaw_rate(&yaw_unwrapped, &times, i, i.checked_sub(1), gap_w);
            let wb = side_yaw_rate(
                &yaw_unwrapped,
                &times,
                i + 1,
                (i + 2 < states.len()).then_some(i + 2),
                gap_w,
            );
            for k in 1..=missing {
                let frame = a.frame + k;
                let time_s = frame as f64 / traj.frame_rate_hz;
                let state = if degenerate {
                    // nearest-neighbor copy
                    let src = if k * 2 <= missing + 1 { a } else { b };
                    OrientedBoxState { frame, time_s, ..src.clone() }
                } else {
                    let u = (time_s - a.time_s) / dt_gap;
                    let x = hermite(a.center.x, va.x * dt_gap, b.center.x, vb.x * dt_gap, u);
                    let y = hermite(a.center.y, va.y * dt_gap, b.center.y, vb.y * dt_gap, u);
                    let yaw = hermite(
                        yaw_unwrapped[i],
                        wa * dt_gap,
                        yaw_unwrapped[i + 1],
                        wb * dt_gap,
                        u,
                    );
                    OrientedBoxState {
                        frame,
                        time_s,
                        center: nalgebra::Point2::new(x, y),
                        length: a.length + (b.length - a.length) * u,
                        width: a.width + (b.width - a.width) * u,
                        yaw_rad: angle::wrap(yaw),
                        heading_rad: None,
                        speed_mps: None,
                        accel_mps2: None,
                        confidence: None,
                        interpolated: true,
                        source_px: None,
                    }
                };
                let mut state = state;
                state.interpolated = true;
                state.confidence = None;
                pieces.last_mut().unwrap().push(state);
                filled += 1;
            }
        }
        pieces.last_mut().unwrap().push(b.clone());
    }

    let pieces = pieces
        .into_iter()
        .filter(|p| !p.is_empty())
        .map(|p| traj.with_states(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(InterpolationOutcome { pieces, filled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Unit, VehicleClass};
    use approx::assert_abs_diff_eq;
    use nalgebra::Point2;

    fn track_from(points: &[(i64, f64, f64, f64)]) -> Trajectory {
        let states = points
            .iter()
            .map(|&(f, x, y, yaw)| {
                OrientedBoxState::observed(f, f as f64 / 10.0, Point2::new(x, y), 4.0, 2.0, yaw, 0.9)
            })
            .collect();
        Trajectory::new(1, VehicleClass::Car, Unit::Meter, 10.0, states).unwrap()
    }

    #[test]
    fn no_gaps_is_identity() {
        let t = track_from(&[(0, 0.0, 0.0, 0.0), (1, 1.0, 0.0, 0.0), (2, 2.0, 0.0, 0.0)]);
        let out = kinematic_interpolate(&t, 20).unwrap();
        assert_eq!(out.filled, 0);
        assert!(!out.split());
        assert_eq!(out.pieces[0], t);
    }

    #[test]
    fn constant_velocity_fill_is_exact() {
        // frames 3..5 removed from a 1 m-per-frame straight run
        let pts: Vec<(i64, f64, f64, f64)> = [0, 1, 2, 6, 7, 8]
            .iter()
            .map(|&f| (f as i64, f as f64 * 1.0, f as f64 * 0.5, 0.2))
            .collect();
        let t = track_from(&pts);
        let out = kinematic_interpolate(&t, 20).unwrap();
        assert_eq!(out.filled, 3);
        let piece = &out.pieces[0];
        assert_eq!(piece.len(), 9);
        for s in piece.states() {
            assert_abs_diff_eq!(s.center.x, s.frame as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(s.center.y, s.frame as f64 * 0.5, epsilon = 1e-9);
            assert_eq!(s.interpolated, ![0, 1, 2, 6, 7, 8].contains(&s.frame));
            assert_eq!(s.confidence.is_none(), s.interpolated);
        }
    }

    #[test]
    fn constant_turn_rate_yaw_within_half_degree() {
        // circular motion: yaw advances 3 deg per frame; remove frames 5..9
        let rate = 3f64.to_radians();
        let radius = 20.0;
        let pts: Vec<(i64, f64, f64, f64)> = (0..20)
            .filter(|f| !(5..10).contains(f))
            .map(|f| {
                let th = rate * f as f64;
                (
                    f as i64,
                    radius * th.cos(),
                    radius * th.sin(),
                    th + std::f64::consts::FRAC_PI_2,
                )
            })
            .collect();
        let t = track_from(&pts);
        let out = kinematic_interpolate(&t, 20).unwrap();
        assert!(!out.split());
        let piece = &out.pieces[0];
        for s in piece.states() {
            let truth = angle::wrap(rate * s.frame as f64 + std::f64::consts::FRAC_PI_2);
            assert!(
                angle::distance(s.yaw_rad, truth).to_degrees() <= 0.5,
                "frame {} yaw off by {} deg",
                s.frame,
                angle::distance(s.yaw_rad, truth).to_degrees()
            );
        }
    }

    #[test]
    fn oversized_gap_splits() {
        let mut pts = vec![(0, 0.0, 0.0, 0.0), (1, 1.0, 0.0, 0.0)];
        pts.push((30, 30.0, 0.0, 0.0));
        pts.push((31, 31.0, 0.0, 0.0));
        let t = track_from(&pts);
        // gap of 28 missing frames > 20: split into two pieces, nothing filled
        let out = kinematic_interpolate(&t, 20).unwrap();
        assert!(out.split());
        assert_eq!(out.pieces.len(), 2);
        assert_eq!(out.filled, 0);
        assert_eq!(out.pieces[0].len(), 2);
        assert_eq!(out.pieces[1].len(), 2);
        // boundary: exactly max_gap_frames missing is filled, not split
        let t2 = track_from(&[(0, 0.0, 0.0, 0.0), (21, 21.0, 0.0, 0.0)]);
        let out2 = kinematic_interpolate(&t2, 20).unwrap();
        assert!(!out2.split());
        assert_eq!(out2.filled, 20);
    }

    #[test]
    fn yaw_interpolates_across_the_wrap_seam() {
        let t = track_from(&[
            (0, 0.0, 0.0, 3.1),
            (1, 1.0, 0.0, 3.14),
            (4, 4.0, 0.0, -3.13),
            (5, 5.0, 0.0, -3.09),
        ]);
        let out = kinematic_interpolate(&t, 20).unwrap();
        let piece = &out.pieces[0];
        // filled yaws stay near the seam instead of sweeping through zero
        for s in piece.states() {
            assert!(angle::distance(s.yaw_rad, std::f64::consts::PI) < 0.2, "yaw {}", s.yaw_rad);
        }
    }
}
