//! Plane homography from undistorted pixels to WGS84 (lon, lat), fitted to
//! ground control points with the normalized direct linear transform.

use nalgebra::{DMatrix, Matrix3, Point2, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::georef::utm::{to_utm_zoned, UtmZone};

/// A surveyed ground control point: where a ground feature appears in the
/// (undistorted) image and its geodetic position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gcp {
    pub px: Point2<f64>,
    pub lon_deg: f64,
    pub lat_deg: f64,
}

/// Projective map from undistorted pixel coordinates to (lon, lat) degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    /// Root-mean-square reprojection error of the fit, in meters on the
    /// ground (UTM plane of the control points).
    pub rms_residual_m: f64,
}

/// Ratio of smallest to largest singular value below which the DLT system is
/// treated as rank deficient (collinear or coincident control points).
const RANK_RATIO: f64 = 1e-9;

/// Similarity that centers points on their centroid and scales the mean
/// distance to sqrt(2).
fn normalizer(points: &[(f64, f64)]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for &(x, y) in points {
        mx += x / n;
        my += y / n;
    }
    let mean_dist: f64 = points.iter().map(|&(x, y)| (x - mx).hypot(y - my)).sum::<f64>() / n;
    if mean_dist < 1e-12 {
        return Err(Error::DegenerateGcps);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

fn apply3(m: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
    let v = m * Vector3::new(x, y, 1.0);
    (v.x / v.z, v.y / v.z)
}

/// Fit the pixel-to-WGS84 homography to at least four control points.
///
/// Collinear or coincident configurations are rejected: the linear system
/// must determine the eight degrees of freedom uniquely.
pub fn fit_homography(gcps: &[Gcp]) -> Result<Homography> {
    if gcps.len() < 4 {
        return Err(Error::TooFewGcps(gcps.len()));
    }
    for g in gcps {
        if !(g.px.x.is_finite()
            && g.px.y.is_finite()
            && g.lon_deg.is_finite()
            && g.lat_deg.is_finite())
        {
            return Err(Error::NonFinite { context: "ground control point".into() });
        }
    }
    let src: Vec<(f64, f64)> = gcps.iter().map(|g| (g.px.x, g.px.y)).collect();
    let dst: Vec<(f64, f64)> = gcps.iter().map(|g| (g.lon_deg, g.lat_deg)).collect();
    let t_src = normalizer(&src)?;
    let t_dst = normalizer(&dst)?;

    let mut a = DMatrix::zeros(2 * gcps.len(), 9);
    for (i, (&(sx, sy), &(dx, dy))) in src.iter().zip(&dst).enumerate() {
        let (x, y) = apply3(&t_src, sx, sy);
        let (u, v) = apply3(&t_dst, dx, dy);
        let r0 = 2 * i;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        let r1 = r0 + 1;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    // h = eigenvector of A^T A with the smallest eigenvalue
    let ata = a.transpose() * &a;
    let eig = SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lam_min = eig.eigenvalues[order[0]].max(0.0);
    let lam_second = eig.eigenvalues[order[1]].max(0.0);
    let lam_max = eig.eigenvalues[order[8]].max(0.0);
    // a unique (up to scale) null direction requires exactly one tiny
    // eigenvalue; a second one means the control points do not pin the plane
    if lam_max <= 0.0 || (lam_second / lam_max).sqrt() < RANK_RATIO {
        return Err(Error::DegenerateGcps);
    }
    let _ = lam_min;
    let h = eig.eigenvectors.column(order[0]);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_dst_inv = t_dst.try_inverse().ok_or(Error::SingularHomography)?;
    let mut m = t_dst_inv * h_norm * t_src;
    if m[(2, 2)].abs() > 1e-12 {
        m /= m[(2, 2)];
    }

    let hom = Homography { m, rms_residual_m: 0.0 };
    let rms = rms_residual_m(&hom, gcps)?;
    Ok(Homography { m, rms_residual_m: rms })
}

/// RMS distance in meters between projected and surveyed control points,
/// measured on the UTM plane of the survey.
fn rms_residual_m(hom: &Homography, gcps: &[Gcp]) -> Result<f64> {
    let n = gcps.len() as f64;
    let mean_lon = gcps.iter().map(|g| g.lon_deg).sum::<f64>() / n;
    let mean_lat = gcps.iter().map(|g| g.lat_deg).sum::<f64>() / n;
    let zone = UtmZone::containing(mean_lat, mean_lon)?;
    let mut sum_sq = 0.0;
    for g in gcps {
        let (lon, lat) = hom.apply(g.px);
        let pred = to_utm_zoned(lat, lon, zone)?;
        let truth = to_utm_zoned(g.lat_deg, g.lon_deg, zone)?;
        sum_sq += (pred.easting_m - truth.easting_m).powi(2)
            + (pred.northing_m - truth.northing_m).powi(2);
    }
    Ok((sum_sq / n).sqrt())
}

impl Homography {
    /// Build directly from a 3x3 matrix (row major). Used by synthetic scenes
    /// and calibration files; the residual of a constructed map is zero.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "homography matrix".into() });
        }
        if m.try_inverse().is_none() {
            return Err(Error::SingularHomography);
        }
        let mut m = m;
        if m[(2, 2)].abs() > 1e-12 {
            m /= m[(2, 2)];
        }
        Ok(Homography { m, rms_residual_m: 0.0 })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Map an undistorted pixel to (lon_deg, lat_deg).
    pub fn apply(&self, p: Point2<f64>) -> (f64, f64) {
        apply3(&self.m, p.x, p.y)
    }

    /// The inverse map, (lon_deg, lat_deg) to undistorted pixel.
    pub fn inverse(&self) -> Result<Homography> {
        let inv = self.m.try_inverse().ok_or(Error::SingularHomography)?;
        let mut inv = inv;
        if inv[(2, 2)].abs() > 1e-12 {
            inv /= inv[(2, 2)];
        }
        Ok(Homography { m: inv, rms_residual_m: self.rms_residual_m })
    }
}
