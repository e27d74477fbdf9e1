//! Constant-velocity Kalman filtering with a Rauch-Tung-Striebel backward
//! pass, applied independently per axis.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Smoothed series for one axis.
#[derive(Debug, Clone)]
pub struct RtsSeries {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    /// Covariance traces after the forward pass.
    pub filtered_trace: Vec<f64>,
    /// Covariance traces after the backward pass.
    pub smoothed_trace: Vec<f64>,
}

/// Initial position/velocity variance, m^2 and (m/s)^2.
const P0: f64 = 100.0;

/// Forward filter + backward smoother over evenly spaced measurements of one
/// coordinate. `q` is the white-acceleration spectral density, `r` the
/// measurement variance.
pub fn rts_smooth_series(z: &[f64], dt: f64, q: f64, r: f64) -> Result<RtsSeries> {
    if !(q > 0.0 && r > 0.0 && q.is_finite() && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "process and measurement noise must be positive (q {q}, r {r})"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if z.is_empty() {
        return Err(Error::InvalidParameter("empty measurement series".into()));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: format!("measurement at index {i}") });
    }

    let n = z.len();
    let f = Matrix2::new(1.0, dt, 0.0, 1.0);
    let qm = Matrix2::new(
        q * dt * dt * dt / 3.0,
        q * dt * dt / 2.0,
        q * dt * dt / 2.0,
        q * dt,
    );
    let h = nalgebra::RowVector2::new(1.0, 0.0);

    let v0 = if n >= 2 { (z[1] - z[0]) / dt } else { 0.0 };
    let mut x = Vector2::new(z[0], v0);
    let mut p = Matrix2::new(P0, 0.0, 0.0, P0);

    let mut xf = Vec::with_capacity(n);
    let mut pf = Vec::with_capacity(n);
    let mut xp = Vec::with_capacity(n); // prediction made for step k (k >= 1)
    let mut pp = Vec::with_capacity(n);

    for (k, &zk) in z.iter().enumerate() {
        if k > 0 {
            x = f * x;
            p = f * p * f.transpose() + qm;
        }
        xp.push(x);
        pp.push(p);
        let s = (h * p * h.transpose())[(0, 0)] + r;
        let kg = p * h.transpose() / s;
        x += kg * (zk - x[0]);
        p = (Matrix2::identity() - kg * h) * p;
        xf.push(x);
        pf.push(p);
    }

    let mut xs = vec![Vector2::zeros(); n];
    let mut ps = vec![Matrix2::zeros(); n];
    xs[n - 1] = xf[n - 1];
    ps[n - 1] = pf[n - 1];
    for k in (0..n - 1).rev() {
        let pred_inv = pp[k + 1]
            .try_inverse()
            .ok_or_else(|| Error::NonFinite { context: "singular predicted covariance".into() })?;
        let g = pf[k] * f.transpose() * pred_inv;
        xs[k] = xf[k] + g * (xs[k + 1] - xp[k + 1]);
        ps[k] = pf[k] + g * (ps[k + 1] - pp[k + 1]) * g.transpose();
    }

    Ok(RtsSeries {
        pos: xs.iter().map(|v| v[0]).collect(),
        vel: xs.iter().map(|v| v[1]).collect(),
        filtered_trace: pf.iter().map(|m| m.trace()).collect(),
        smoothed_trace: ps.iter().map(|m| m.trace()).collect(),
    })
}

/// Central-difference derivative of a speed series; one-sided at the ends.
/// Series shorter than 3 yield zeros (the caller may warn).
pub fn central_diff_accel(speed: &[f64], dt: f64) -> Vec<f64> {
    let n = speed.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut out = Vec::with_capacity(n);
    out.push((speed[1] - speed[0]) / dt);
    for i in 1..n - 1 {
        out.push((speed[i + 1] - speed[i - 1]) / (2.0 * dt));
    }
    out.push((speed[n - 1] - speed[n - 2]) / dt);
    out
}
