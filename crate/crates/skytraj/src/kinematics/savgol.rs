//! Savitzky-Golay smoothing with a window that shrinks near segment
//! boundaries, so no sample is ever fit against data across a gap.

use nalgebra::DMatrix;

/// Center-sample weights for a symmetric window of `2 * half + 1` samples and
/// a polynomial of `poly` degrees. Weights reproduce polynomials up to that
/// degree exactly.
pub fn savgol_weights(half: usize, poly: usize) -> Vec<f64> {
    let n = 2 * half + 1;
    let cols = poly + 1;
    debug_assert!(n > poly, "window must exceed polynomial order");
    // Vandermonde in the window offsets
    let x = DMatrix::from_fn(n, cols, |i, j| ((i as f64) - half as f64).powi(j as i32));
    let xtx = x.transpose() * &x;
    let mut e0 = nalgebra::DVector::zeros(cols);
    e0[0] = 1.0;
    let z = xtx
        .lu()
        .solve(&e0)
        .expect("normal equations of a Vandermonde basis are invertible");
    (x * z).iter().copied().collect()
}

/// Smooth one gap-free series. The window is at most `max_window` (odd) wide
/// and shrinks to the largest symmetric window that fits near the ends. Series
/// shorter than `poly + 2` are passed through unchanged (the caller may warn).
pub fn savgol_dynamic(series: &[f64], poly: usize, max_window: usize) -> Vec<f64> {
    let n = series.len();
    if n < poly + 2 {
        return series.to_vec();
    }
    let max_half = (max_window.max(1) - 1) / 2;
    let mut out = Vec::with_capacity(n);
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; max_half + 1];
    for i in 0..n {
        let half = max_half.min(i).min(n - 1 - i);
        if 2 * half + 1 <= poly + 1 {
            // the fit interpolates exactly; the center sample is unchanged
            out.push(series[i]);
            continue;
        }
        let w = cache[half].get_or_insert_with(|| savgol_weights(half, poly));
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * series[i - half + k];
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn weights_sum_to_one() {
        for half in 1..=7 {
            for poly in 0..(2 * half).min(5) {
                let w = savgol_weights(half, poly);
                let s: f64 = w.iter().sum();
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn reproduces_polynomials_up_to_order() {
        // quadratic input, order 2: output equals input
        let series: Vec<f64> = (0..40).map(|i| {
            let t = i as f64 * 0.1;
            1.5 - 0.7 * t + 0.3 * t * t
        }).collect();
        let out = savgol_dynamic(&series, 2, 11);
        assert_eq!(out.len(), series.len());
        for (o, s) in out.iter().zip(&series) {
            assert_abs_diff_eq!(o, s, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_series_unchanged() {
        let series = vec![4.2; 25];
        let out = savgol_dynamic(&series, 2, 11);
        for o in out {
            assert_abs_diff_eq!(o, 4.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_series_pass_through() {
        let series = vec![1.0, 5.0, -2.0];
        assert_eq!(savgol_dynamic(&series, 2, 11), series);
    }

    #[test]
    fn noise_variance_shrinks_about_a_sinusoid() {
        // Monte-Carlo oracle: white noise on a slow sinusoid; residual variance
        // must drop in every seeded run
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let clean: Vec<f64> = (0..200)
                .map(|i| (i as f64 * 0.05).sin() * 3.0)
                .collect();
            let noisy: Vec<f64> = clean
                .iter()
                .map(|c| c + rng.gen_range(-0.5..0.5))
                .collect();
            let out = savgol_dynamic(&noisy, 2, 11);
            let var = |xs: &[f64]| -> f64 {
                xs.iter()
                    .zip(&clean)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum::<f64>()
                    / xs.len() as f64
            };
            assert!(
                var(&out) < var(&noisy),
                "seed {seed}: variance must shrink ({} vs {})",
                var(&out),
                var(&noisy)
            );
        }
    }

    #[test]
    fn window_shrinks_at_boundaries() {
        // a step at the segment end must not bleed in from beyond the series:
        // compare the last sample's smoothing against an explicitly shrunken fit
        let series: Vec<f64> = (0..15).map(|i| i as f64 * i as f64).collect();
        let out = savgol_dynamic(&series, 2, 11);
        // order-2 fit reproduces the quadratic everywhere, including the ends,
        // only if the shrunken windows are symmetric
        for (o, s) in out.iter().zip(&series) {
            assert_abs_diff_eq!(o, s, epsilon = 1e-9);
        }
        // ends of any series are exact copies when the window degenerates
        let jagged = vec![0.0, 9.0, 1.0, 8.0, 2.0, 7.0, 3.0];
        let sm = savgol_dynamic(&jagged, 2, 5);
        assert_abs_diff_eq!(sm[0], jagged[0], epsilon = 1e-12);
        assert_abs_diff_eq!(sm[jagged.len() - 1], jagged[jagged.len() - 1], epsilon = 1e-12);
    }
}
