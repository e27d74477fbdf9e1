//! Circular arithmetic helpers. All angles are radians unless a name says otherwise.

use std::f64::consts::PI;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on +pi through rounding
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn distance(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

/// Angular separation folded to degrees in `[0, 180]`.
pub fn fold_deg(a: f64, b: f64) -> f64 {
    distance(a, b).to_degrees()
}

/// Unwrap a sequence so consecutive samples never jump by more than pi.
/// The first sample is kept as-is; later samples may leave `[-pi, pi)`.
pub fn unwrap_sequence(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut prev_in = f64::NAN;
    let mut prev_out = f64::NAN;
    for &a in angles {
        let next = if prev_out.is_finite() {
            prev_out + wrap(a - prev_in)
        } else {
            a
        };
        out.push(next);
        prev_in = a;
        prev_out = next;
    }
    out
}

/// Interpolate between two angles along the shorter arc; `t` in `[0, 1]`.
pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    wrap(a + wrap(b - a) * t)
}
