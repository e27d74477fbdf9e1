//! Trajectory smoothing and refinement.
//!
//! The stage order is fixed: Savitzky-Golay pre-smoothing on the observed
//! samples, kinematic gap interpolation, Rauch-Tung-Striebel smoothing, then
//! motion refinement (median dimensions, yaw stabilization, heading-referenced
//! yaw correction). Smoothing a gapped trajectory without interpolation is
//! rejected.

pub mod interpolate;
pub mod rts;
pub mod savgol;
pub mod yaw;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::model::{TrackTable, Trajectory};

pub use interpolate::{kinematic_interpolate, InterpolationOutcome};
pub use rts::{central_diff_accel, rts_smooth_series, RtsSeries};
pub use savgol::{savgol_dynamic, savgol_weights};
pub use yaw::{correct_yaw_with_heading, stabilize_yaw};

/// Tuning for the smoothing stage. Angular tolerances are degrees in config
/// files; accessors convert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmootherConfig {
    pub sg_poly_order: usize,
    pub sg_max_window: usize,
    /// White-acceleration spectral density, (m/s^2)^2.
    pub process_noise_q: f64,
    /// Measurement variance, m^2.
    pub measurement_noise_r: f64,
    pub max_gap_frames: i64,
    pub speed_gate_mps: f64,
    pub max_yaw_dev_deg: f64,
    pub k_stable: usize,
    pub tol_stable_deg: f64,
    pub tol_outlier_deg: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            sg_poly_order: 2,
            sg_max_window: 11,
            process_noise_q: 2.0,
            measurement_noise_r: 0.25,
            max_gap_frames: 20,
            speed_gate_mps: 1.0,
            max_yaw_dev_deg: 45.0,
            k_stable: 5,
            tol_stable_deg: 5.0,
            tol_outlier_deg: 30.0,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sg_max_window % 2 == 0 || self.sg_max_window <= self.sg_poly_order {
            return Err(Error::InvalidParameter(format!(
                "sg_max_window must be odd and exceed sg_poly_order (window {}, order {})",
                self.sg_max_window, self.sg_poly_order
            )));
        }
        if !(self.process_noise_q > 0.0 && self.measurement_noise_r > 0.0) {
            return Err(Error::InvalidParameter(
                "process_noise_q and measurement_noise_r must be positive".into(),
            ));
        }
        if self.max_gap_frames < 0 {
            return Err(Error::InvalidParameter("max_gap_frames must be non-negative".into()));
        }
        if self.k_stable == 0 {
            return Err(Error::InvalidParameter("k_stable must be at least 1".into()));
        }
        for (name, v) in [
            ("speed_gate_mps", self.speed_gate_mps),
            ("max_yaw_dev_deg", self.max_yaw_dev_deg),
            ("tol_stable_deg", self.tol_stable_deg),
            ("tol_outlier_deg", self.tol_outlier_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Per-axis medians of length and width over observed states.
pub fn median_dimensions(traj: &Trajectory) -> Result<(f64, f64)> {
    let mut lengths: Vec<f64> = Vec::new();
    let mut widths: Vec<f64> = Vec::new();
    for s in traj.states() {
        if !s.interpolated {
            lengths.push(s.length);
            widths.push(s.width);
        }
    }
    if lengths.is_empty() {
        return Err(Error::NoObservations);
    }
    Ok((median(&mut lengths), median(&mut widths)))
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Rewrite every state with the median observed dimensions.
pub fn apply_median_dimensions(traj: &Trajectory) -> Result<Trajectory> {
    let (length, width) = median_dimensions(traj)?;
    traj.map_states(|mut s| {
        s.length = length;
        s.width = width;
        s
    })
}

/// Notes produced while smoothing one table.
#[derive(Debug, Clone, Default)]
pub struct SmoothReport {
    pub warnings: Vec<String>,
    /// Tracks split at oversized gaps: source id and the ids of all pieces.
    pub splits: Vec<(u64, Vec<u64>)>,
    /// Interpolated states created.
    pub filled: usize,
}

/// Savitzky-Golay on x/y per contiguous frame segment (windows never span a
/// gap), leaving everything else untouched.
pub fn presmooth_positions(traj: &Trajectory, cfg: &SmootherConfig) -> Result<(Trajectory, Vec<String>)> {
    let mut warnings = Vec::new();
    let states = traj.states();
    let mut out = states.to_vec();
    let mut seg_start = 0usize;
    let mut segments = Vec::new();
    for i in 1..=states.len() {
        if i == states.len() || states[i].frame != states[i - 1].frame + 1 {
            segments.push(seg_start..i);
            seg_start = i;
        }
    }
    for seg in segments {
        let xs: Vec<f64> = states[seg.clone()].iter().map(|s| s.center.x).collect();
        let ys: Vec<f64> = states[seg.clone()].iter().map(|s| s.center.y).collect();
        if xs.len() < cfg.sg_poly_order + 2 {
            warnings.push(format!(
                "track {}: segment of {} samples below Savitzky-Golay minimum, passed through",
                traj.track_id,
                xs.len()
            ));
            continue;
        }
        let sx = savgol_dynamic(&xs, cfg.sg_poly_order, cfg.sg_max_window);
        let sy = savgol_dynamic(&ys, cfg.sg_poly_order, cfg.sg_max_window);
        for (k, idx) in seg.enumerate() {
            out[idx].center.x = sx[k];
            out[idx].center.y = sy[k];
        }
    }
    Ok((traj.with_states(out)?, warnings))
}

/// RTS-smooth one gap-free trajectory: positions, velocities, headings, and
/// accelerations are rewritten. Errors if the trajectory still has gaps.
pub fn rts_smooth(traj: &Trajectory, cfg: &SmootherConfig) -> Result<Trajectory> {
    let states = traj.states();
    if states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    for w in states.windows(2) {
        if w[1].frame != w[0].frame + 1 {
            return Err(Error::GapNotInterpolated { track_id: traj.track_id, frame: w[1].frame });
        }
    }
    for s in states {
        if !s.center.x.is_finite() || !s.center.y.is_finite() {
            return Err(Error::NonFinite {
                context: format!("track {} position at frame {}", traj.track_id, s.frame),
            });
        }
    }
    let dt = traj.dt();
    let xs: Vec<f64> = states.iter().map(|s| s.center.x).collect();
    let ys: Vec<f64> = states.iter().map(|s| s.center.y).collect();
    let rx = rts_smooth_series(&xs, dt, cfg.process_noise_q, cfg.measurement_noise_r)?;
    let ry = rts_smooth_series(&ys, dt, cfg.process_noise_q, cfg.measurement_noise_r)?;

    let n = states.len();
    let speed: Vec<f64> = (0..n).map(|i| rx.vel[i].hypot(ry.vel[i])).collect();
    let accel = central_diff_accel(&speed, dt);

    // headings from the velocity vector; hold through near-zero speeds
    let mut heading = vec![f64::NAN; n];
    for i in 0..n {
        if speed[i] > 1e-9 {
            heading[i] = ry.vel[i].atan2(rx.vel[i]);
        }
    }
    let mut last = f64::NAN;
    for h in heading.iter_mut() {
        if h.is_nan() {
            *h = last;
        } else {
            last = *h;
        }
    }
    let mut next = f64::NAN;
    for i in (0..n).rev() {
        if heading[i].is_nan() {
            heading[i] = next;
        } else {
            next = heading[i];
        }
    }

    let mut out = states.to_vec();
    for i in 0..n {
        out[i].center.x = rx.pos[i];
        out[i].center.y = ry.pos[i];
        out[i].speed_mps = Some(speed[i]);
        out[i].accel_mps2 = Some(accel[i]);
        out[i].heading_rad = Some(if heading[i].is_nan() { out[i].yaw_rad } else {
            angle::wrap(heading[i])
        });
    }
    traj.with_states(out)
}

/// Run the full smoothing pipeline on one trajectory. Returns one piece per
/// oversized gap split; pieces all still carry the source id.
pub fn smooth_trajectory(
    traj: &Trajectory,
    cfg: &SmootherConfig,
) -> Result<(Vec<Trajectory>, SmoothReport)> {
    cfg.validate()?;
    let mut report = SmoothReport::default();

    let (pre, mut warn) = presmooth_positions(traj, cfg)?;
    report.warnings.append(&mut warn);

    let interp = kinematic_interpolate(&pre, cfg.max_gap_frames)?;
    report.filled = interp.filled;

    let mut pieces = Vec::with_capacity(interp.pieces.len());
    for piece in &interp.pieces {
        let smoothed = rts_smooth(piece, cfg)?;
        let refined = apply_median_dimensions(&smoothed)?;
        let yaws: Vec<f64> = refined.states().iter().map(|s| s.yaw_rad).collect();
        let stab = stabilize_yaw(
            &yaws,
            cfg.k_stable,
            cfg.tol_stable_deg.to_radians(),
            cfg.tol_outlier_deg.to_radians(),
        );
        let restabilized = {
            let mut k = 0;
            refined.map_states(|mut s| {
                s.yaw_rad = angle::wrap(stab[k]);
                k += 1;
                s
            })?
        };
        let corrected = correct_yaw_with_heading(
            &restabilized,
            cfg.speed_gate_mps,
            cfg.max_yaw_dev_deg.to_radians(),
        )?;
        pieces.push(corrected);
    }
    Ok((pieces, report))
}

/// Smooth every trajectory of a table. Split pieces receive fresh ids above
/// the current maximum, in deterministic order.
pub fn smooth_table(table: &TrackTable, cfg: &SmootherConfig) -> Result<(TrackTable, SmoothReport)> {
    cfg.validate()?;
    let inputs: Vec<&Trajectory> = table.iter().collect();
    let results: Vec<(Vec<Trajectory>, SmoothReport)> = inputs
        .par_iter()
        .map(|traj| smooth_trajectory(traj, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut out = table.like();
    let mut report = SmoothReport::default();
    let mut next_id = table.next_free_id();
    for (pieces, mut piece_report) in results {
        report.warnings.append(&mut piece_report.warnings);
        report.filled += piece_report.filled;
        let source_id = pieces[0].track_id;
        let mut assigned = Vec::with_capacity(pieces.len());
        for (k, piece) in pieces.into_iter().enumerate() {
            let id = if k == 0 {
                source_id
            } else {
                let id = next_id;
                next_id += 1;
                id
            };
            assigned.push(id);
            let mut renamed = piece;
            renamed.track_id = id;
            out.insert(renamed)?;
        }
        if assigned.len() > 1 {
            report.splits.push((source_id, assigned));
        }
    }
    Ok((out, report))
}
