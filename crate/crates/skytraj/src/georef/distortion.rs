//! Camera intrinsics, Brown-Conrady lens distortion, and ruler-based
//! refinement of the distortion coefficients and ground sampling distance.

use nalgebra::{DMatrix, DVector, Point2};

use crate::error::{Error, Result};

/// Intrinsics and distortion of the nadir-looking camera.
///
/// `dist` holds `[k1, k2, p1, p2, k3]`: radial terms `k*`, tangential `p*`,
/// applied on normalized image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub dist: [f64; 5],
    pub gsd_m_per_px: f64,
    pub altitude_m: f64,
    pub image_width_px: f64,
    pub image_height_px: f64,
}

/// Acceptable relative disagreement between the configured GSD and the
/// altitude-implied GSD.
const GSD_CONSISTENCY: f64 = 0.05;

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        dist: [f64; 5],
        gsd_m_per_px: f64,
        altitude_m: f64,
        image_width_px: f64,
        image_height_px: f64,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::Camera(format!("focal lengths must be positive (fx {fx}, fy {fy})")));
        }
        if !(image_width_px > 0.0 && image_height_px > 0.0) {
            return Err(Error::Camera("image dimensions must be positive".into()));
        }
        if !(gsd_m_per_px > 0.0 && altitude_m > 0.0) {
            return Err(Error::Camera("gsd and altitude must be positive".into()));
        }
        let implied = altitude_m / (0.5 * (fx + fy));
        if (gsd_m_per_px - implied).abs() / implied > GSD_CONSISTENCY {
            return Err(Error::Camera(format!(
                "gsd {gsd_m_per_px} m/px inconsistent with altitude-implied {implied:.6} m/px \
                 (beyond {:.0}%)",
                GSD_CONSISTENCY * 100.0
            )));
        }
        if dist.iter().any(|d| !d.is_finite()) {
            return Err(Error::Camera("distortion coefficients must be finite".into()));
        }
        Ok(CameraModel {
            fx,
            fy,
            cx,
            cy,
            dist,
            gsd_m_per_px,
            altitude_m,
            image_width_px,
            image_height_px,
        })
    }

    /// GSD implied by flight altitude and focal length; the default when no
    /// ruler measurements are available.
    pub fn implied_gsd(altitude_m: f64, fx: f64, fy: f64) -> f64 {
        altitude_m / (0.5 * (fx + fy))
    }

    fn normalize(&self, p: Point2<f64>) -> (f64, f64) {
        ((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy)
    }

    fn denormalize(&self, x: f64, y: f64) -> Point2<f64> {
        Point2::new(x * self.fx + self.cx, y * self.fy + self.cy)
    }

    fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let [k1, k2, p1, p2, k3] = self.dist;
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        let xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        (xd, yd)
    }

    /// Forward model: ideal (undistorted) pixel to observed (distorted) pixel.
    pub fn distort(&self, ideal: Point2<f64>) -> Point2<f64> {
        let (x, y) = self.normalize(ideal);
        let (xd, yd) = self.distort_normalized(x, y);
        self.denormalize(xd, yd)
    }

    /// True when the pixel lies within the image padded by 10% per side.
    pub fn in_padded_bounds(&self, p: Point2<f64>) -> bool {
        let px = 0.1 * self.image_width_px;
        let py = 0.1 * self.image_height_px;
        (-px..=self.image_width_px + px).contains(&p.x)
            && (-py..=self.image_height_px + py).contains(&p.y)
    }

    /// Jacobian of [`distort_normalized`] at normalized `(x, y)`:
    /// `[dxd/dx, dxd/dy, dyd/dx, dyd/dy]`.
    fn distort_jacobian(&self, x: f64, y: f64) -> [f64; 4] {
        let [k1, k2, p1, p2, k3] = self.dist;
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        let dradial = k1 + r2 * (2.0 * k2 + r2 * 3.0 * k3);
        [
            radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x,
            2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
            2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
            radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x,
        ]
    }

    /// Invert the distortion model for an observed pixel: fixed-point
    /// iteration (at most 20 rounds, tolerance 1e-8 normalized units)
    /// followed by a short Newton polish on the forward model. With all-zero
    /// coefficients the point passes through exactly.
    pub fn undistort(&self, observed: Point2<f64>) -> Result<Point2<f64>> {
        if !self.in_padded_bounds(observed) {
            return Err(Error::Camera(format!(
                "pixel ({}, {}) outside padded image bounds",
                observed.x, observed.y
            )));
        }
        let [k1, k2, p1, p2, k3] = self.dist;
        let (xd, yd) = self.normalize(observed);
        let mut x = xd;
        let mut y = yd;
        for _ in 0..20 {
            let r2 = x * x + y * y;
            let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
            if radial.abs() < 1e-9 {
                return Err(Error::UndistortDiverged { x: observed.x, y: observed.y });
            }
            let dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
            let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
            let xn = (xd - dx) / radial;
            let yn = (yd - dy) / radial;
            let step = (xn - x).hypot(yn - y);
            x = xn;
            y = yn;
            if step < 1e-8 {
                break;
            }
        }
        // Newton polish: the fixed point stops when its *step* is small, but
        // the remaining error can exceed it; two quadratic steps close it
        for _ in 0..3 {
            let (fx_, fy_) = self.distort_normalized(x, y);
            let (rx, ry) = (fx_ - xd, fy_ - yd);
            if rx.hypot(ry) < 1e-14 {
                break;
            }
            let [a, b, c, d] = self.distort_jacobian(x, y);
            let det = a * d - b * c;
            if det.abs() < 1e-12 {
                break;
            }
            x -= (d * rx - b * ry) / det;
            y -= (-c * rx + a * ry) / det;
        }
        // verify the result actually inverts the forward model
        let (xc, yc) = self.distort_normalized(x, y);
        if (xc - xd).hypot(yc - yd) > 1e-8 || !x.is_finite() || !y.is_finite() {
            return Err(Error::UndistortDiverged { x: observed.x, y: observed.y });
        }
        Ok(self.denormalize(x, y))
    }
}

/// A scene measurement: two observed pixel endpoints of a segment whose true
/// metric length is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RulerPair {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
    pub true_length_m: f64,
}

/// Result of fitting distortion + GSD against ruler measurements.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub cam: CameraModel,
    pub warnings: Vec<String>,
    /// Root-mean-square length error before refinement, meters.
    pub initial_rms_m: f64,
    /// Root-mean-square length error after refinement, meters.
    pub final_rms_m: f64,
    pub iterations: usize,
}

/// Minimum ruler pairs accepted by [`refine_distortion`].
pub const MIN_RULER_PAIRS: usize = 5;
/// Pairs whose endpoints all stay below this normalized radius cannot
/// constrain the tangential terms.
const DEGENERATE_RADIUS: f64 = 0.15;

fn residuals(cam: &CameraModel, pairs: &[RulerPair], theta: &DVector<f64>) -> Option<DVector<f64>> {
    let mut candidate = cam.clone();
    candidate.dist = [theta[0], theta[1], theta[2], theta[3], theta[4]];
    let gsd = theta[5];
    if gsd <= 0.0 {
        return None;
    }
    let mut r = DVector::zeros(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let ua = candidate.undistort(pair.a).ok()?;
        let ub = candidate.undistort(pair.b).ok()?;
        r[i] = (ua - ub).norm() * gsd - pair.true_length_m;
    }
    Some(r)
}

/// Refine `[k1, k2, p1, p2, k3]` and the GSD so undistorted ruler lengths
/// match their surveyed values (least squares, damped Gauss-Newton). The
/// returned model never fits worse than `cam0`. Pairs confined near the
/// principal point leave the tangential terms untouched with a warning.
pub fn refine_distortion(cam0: &CameraModel, pairs: &[RulerPair]) -> Result<RefineOutcome> {
    if pairs.len() < MIN_RULER_PAIRS {
        return Err(Error::InsufficientConstraints { got: pairs.len(), need: MIN_RULER_PAIRS });
    }
    for (i, p) in pairs.iter().enumerate() {
        if !(p.true_length_m > 0.0 && p.true_length_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ruler pair {i} must have a positive true length"
            )));
        }
        if !cam0.in_padded_bounds(p.a) || !cam0.in_padded_bounds(p.b) {
            return Err(Error::InvalidParameter(format!(
                "ruler pair {i} endpoint outside padded image bounds"
            )));
        }
    }

    let mut warnings = Vec::new();
    let max_radius = pairs
        .iter()
        .flat_map(|p| [p.a, p.b])
        .map(|p| {
            let (x, y) = ((p.x - cam0.cx) / cam0.fx, (p.y - cam0.cy) / cam0.fy);
            x.hypot(y)
        })
        .fold(0.0f64, f64::max);
    // parameter mask: gsd + radial always free; tangential needs off-center data
    let mut free = [true, true, true, true, true, true];
    if max_radius < DEGENERATE_RADIUS {
        free[2] = false;
        free[3] = false;
        warnings.push(format!(
            "ruler pairs stay within normalized radius {max_radius:.3}; tangential terms held at \
             their initial values"
        ));
    }

    let mut theta = DVector::from_vec(vec![
        cam0.dist[0],
        cam0.dist[1],
        cam0.dist[2],
        cam0.dist[3],
        cam0.dist[4],
        cam0.gsd_m_per_px,
    ]);
    let r0 = residuals(cam0, pairs, &theta)
        .ok_or_else(|| Error::Camera("initial model cannot undistort the ruler pairs".into()))?;
    let mut cost = r0.norm_squared();
    let initial_rms_m = (cost / pairs.len() as f64).sqrt();

    let mut iterations = 0;
    for _ in 0..50 {
        iterations += 1;
        let r = match residuals(cam0, pairs, &theta) {
            Some(r) => r,
            None => break,
        };
        // numeric Jacobian over the free parameters
        let free_idx: Vec<usize> = (0..6).filter(|&j| free[j]).collect();
        let mut jac = DMatrix::zeros(pairs.len(), free_idx.len());
        let mut ok = true;
        for (col, &j) in free_idx.iter().enumerate() {
            let delta = 1e-6 * theta[j].abs().max(1e-4);
            let mut tp = theta.clone();
            tp[j] += delta;
            match residuals(cam0, pairs, &tp) {
                Some(rp) => {
                    for i in 0..pairs.len() {
                        jac[(i, col)] = (rp[i] - r[i]) / delta;
                    }
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let step = match jtj.clone().lu().solve(&jtr) {
            Some(s) => s,
            None => break,
        };
        // damped acceptance: halve until the cost improves
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut trial = theta.clone();
            for (col, &j) in free_idx.iter().enumerate() {
                trial[j] -= scale * step[col];
            }
            if let Some(rt) = residuals(cam0, pairs, &trial) {
                let trial_cost = rt.norm_squared();
                if trial_cost < cost {
                    theta = trial;
                    cost = trial_cost;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        if step.norm() < 1e-12 {
            break;
        }
    }

    let final_rms_m = (cost / pairs.len() as f64).sqrt();
    let cam = CameraModel::new(
        cam0.fx,
        cam0.fy,
        cam0.cx,
        cam0.cy,
        [theta[0], theta[1], theta[2], theta[3], theta[4]],
        theta[5],
        cam0.altitude_m,
        cam0.image_width_px,
        cam0.image_height_px,
    )?;
    Ok(RefineOutcome { cam, warnings, initial_rms_m, final_rms_m, iterations })
}
