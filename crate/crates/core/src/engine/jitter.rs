//! Detector timing jitter on `(tau2, tau3)` surfaces.
//!
//! Each timestamp carries independent Gaussian jitter plus the uniform error
//! of 16 ps quantization. With `t3` shared by both delays, the covariance of
//! `(tau2, tau3)` is `sigma^2 [[2, 1], [1, 2]]`, which splits exactly into
//! three 1D blurs: along `tau2`, along `tau3` and along the diagonal.

use rayon::prelude::*;

use super::surface::CorrelationSurface;
use crate::grid::MAX_STEP_PS;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Per-detector standard deviation for a detector-pair jitter FWHM.
pub fn detector_sigma(pair_fwhm_ps: f64, quantization_ps: f64) -> f64 {
    let pair = pair_fwhm_ps / FWHM_PER_SIGMA;
    (0.5 * pair * pair + quantization_ps * quantization_ps / 12.0).sqrt()
}

/// Convolves with the jitter of two detectors whose coincidence histogram
/// has Gaussian FWHM `pair_fwhm_ps`, including the variance added by
/// timestamp quantization. Mass is preserved exactly: kernel taps falling
/// off the grid are redistributed over the taps that remain.
pub fn apply_jitter(surface: &CorrelationSurface, pair_fwhm_ps: f64) -> CorrelationSurface {
    if pair_fwhm_ps <= 0.0 {
        return surface.clone();
    }
    apply_detector_sigma(surface, detector_sigma(pair_fwhm_ps, MAX_STEP_PS))
}

/// Same as [`apply_jitter`] with the per-detector sigma given directly.
pub fn apply_detector_sigma(surface: &CorrelationSurface, sigma_ps: f64) -> CorrelationSurface {
    if sigma_ps <= 0.0 {
        return surface.clone();
    }
    let taps = gaussian_taps(sigma_ps / surface.axis().step);
    let n = surface.n();
    let mut out = surface.clone();
    let a = scatter(out.values(), n, &taps, Direction::Rows);
    let b = scatter(&a, n, &taps, Direction::Cols);
    let c = scatter(&b, n, &taps, Direction::Diagonal);
    out.values_mut().copy_from_slice(&c);
    out
}

/// Mass-conserving Gaussian blur of a 1D series with spacing `step_ps`.
pub fn blur_series(values: &[f64], step_ps: f64, sigma_ps: f64) -> Vec<f64> {
    if sigma_ps <= 0.0 || values.is_empty() {
        return values.to_vec();
    }
    let taps = gaussian_taps(sigma_ps / step_ps);
    let reach = (taps.len() / 2) as isize;
    let n = values.len() as isize;
    let mut out = vec![0.0; values.len()];
    for (i, &v) in values.iter().enumerate() {
        let on: f64 = taps
            .iter()
            .enumerate()
            .filter(|(t, _)| (0..n).contains(&(i as isize + *t as isize - reach)))
            .map(|(_, w)| w)
            .sum();
        for (t, w) in taps.iter().enumerate() {
            let j = i as isize + t as isize - reach;
            if (0..n).contains(&j) {
                out[j as usize] += v * w / on;
            }
        }
    }
    out
}

fn gaussian_taps(sigma_cells: f64) -> Vec<f64> {
    let reach = (5.0 * sigma_cells).ceil().max(1.0) as isize;
    let w: Vec<f64> = (-reach..=reach)
        .map(|k| (-0.5 * (k as f64 / sigma_cells).powi(2)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Copy)]
enum Direction {
    /// Shift in `tau3` (within a row).
    Rows,
    /// Shift in `tau2`.
    Cols,
    /// Shift in both.
    Diagonal,
}

/// Mass-conserving scatter along one direction. Every source cell is
/// handled independently so the result does not depend on thread count.
fn scatter(values: &[f64], n: usize, taps: &[f64], dir: Direction) -> Vec<f64> {
    let reach = (taps.len() / 2) as isize;
    let n_i = n as isize;
    // Each output row only gathers from sources within `reach` rows, so
    // rows can be filled in parallel by gathering the scattered mass.
    let norm = |i: isize, j: isize| -> f64 {
        // fraction of the kernel that lands on the grid for source (i, j)
        let mut s = 0.0;
        for (t, w) in taps.iter().enumerate() {
            let k = t as isize - reach;
            let (a, b) = match dir {
                Direction::Rows => (i, j + k),
                Direction::Cols => (i + k, j),
                Direction::Diagonal => (i + k, j + k),
            };
            if a >= 0 && a < n_i && b >= 0 && b < n_i {
                s += w;
            }
        }
        s
    };
    // precompute the edge normalization of every source cell
    let mut inv = vec![0.0; n * n];
    inv.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let on_grid = if (i as isize) >= reach
                && (i as isize) < n_i - reach
                && (j as isize) >= reach
                && (j as isize) < n_i - reach
            {
                1.0
            } else {
                norm(i as isize, j as isize)
            };
            *v = 1.0 / on_grid;
        }
    });
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let i = i as isize;
        for (j, slot) in row.iter_mut().enumerate() {
            let j = j as isize;
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let k = t as isize - reach;
                // source that reaches (i, j) with offset k
                let (a, b) = match dir {
                    Direction::Rows => (i, j - k),
                    Direction::Cols => (i - k, j),
                    Direction::Diagonal => (i - k, j - k),
                };
                if a >= 0 && a < n_i && b >= 0 && b < n_i {
                    let idx = a as usize * n + b as usize;
                    acc += w * values[idx] * inv[idx];
                }
            }
            *slot = acc;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::surface::TauAxis;

    fn spike(axis: TauAxis, at: (usize, usize)) -> CorrelationSurface {
        let mut s = CorrelationSurface::zeros(axis);
        let n = s.n();
        s.values_mut()[at.0 * n + at.1] = 1.0;
        s
    }

    #[test]
    fn zero_width_is_identity() {
        let axis = TauAxis::new(160.0, 16.0).unwrap();
        let s = CorrelationSurface::from_fn(axis, |a, b| (a * 0.01).sin() + b.abs());
        assert_eq!(apply_jitter(&s, 0.0), s);
    }

    #[test]
    fn impulse_response_has_the_pair_covariance() {
        let axis = TauAxis::new(800.0, 4.0).unwrap();
        let c = axis.half;
        let out = apply_jitter(&spike(axis, (c, c)), 58.4);
        let (mut m2, mut m3, mut v2, mut v3, mut cov, mut mass) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..out.n() {
            for j in 0..out.n() {
                let w = out.get(i, j);
                let (x, y) = (axis.tau(i), axis.tau(j));
                mass += w;
                m2 += w * x;
                m3 += w * y;
                v2 += w * x * x;
                v3 += w * y * y;
                cov += w * x * y;
            }
        }
        let sd = detector_sigma(58.4, 16.0);
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(m2.abs() < 1e-9 && m3.abs() < 1e-9);
        assert!((v2 / (2.0 * sd * sd) - 1.0).abs() < 1e-3, "{v2}");
        assert!((v3 / (2.0 * sd * sd) - 1.0).abs() < 1e-3);
        assert!((cov / (sd * sd) - 1.0).abs() < 1e-3);
        // tau2 marginal of the pair difference: FWHM 58.4 plus quantization
        let expected = (2.0 * sd * sd).sqrt();
        assert!((v2.sqrt() - expected).abs() < 0.05);
    }

    #[test]
    fn mass_is_preserved_at_the_edges() {
        let axis = TauAxis::new(96.0, 16.0).unwrap();
        for at in [(0, 0), (0, 12), (3, 11), (12, 12), (6, 6)] {
            let out = apply_jitter(&spike(axis, at), 58.4);
            assert!((out.sum() - 1.0).abs() < 1e-12);
            assert!(out.min() >= 0.0);
        }
    }
}
