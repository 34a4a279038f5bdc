use serde::Serialize;

use super::histogram::{cell_mean, plateau_cells, G3Histogram};
use crate::engine::CorrelationSurface;
use crate::error::{RelayError, Result};

/// Pointwise agreement between an analytic surface and a histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Cells with at least `min_expected` expected counts.
    pub cells: Vec<usize>,
    pub within_3_sigma: usize,
    pub fraction_within: f64,
    pub max_abs_z: f64,
    pub mean_z: f64,
    /// RMS of `g_mc - g_analytic` over the compared cells.
    pub rms_difference: f64,
    pub passed: bool,
}

/// Expected counts are the analytic surface scaled so that its plateau
/// equals the histogram's; `z = (n - E) / sqrt(E)`. Passes when at least
/// 99% of the cells with `E >= min_expected` have `|z| <= 3`.
pub fn compare(
    analytic: &CorrelationSurface,
    hist: &G3Histogram,
    period: f64,
    min_expected: f64,
    cells: Option<&[usize]>,
) -> Result<Comparison> {
    analytic.ensure_same_grid(&hist.surface)?;
    let block = plateau_cells(analytic.axis(), period)?;
    let a_plateau = cell_mean(analytic.values(), &block);
    if !(a_plateau > 0.0) || !(hist.plateau > 0.0) {
        return Err(RelayError::invalid("compare", "empty plateau"));
    }
    let scale = hist.plateau / a_plateau;
    let expected = |k: usize| analytic.values()[k].max(0.0) * scale;
    let chosen: Vec<usize> = match cells {
        Some(c) => c.to_vec(),
        None => (0..analytic.values().len()).filter(|&k| expected(k) >= min_expected).collect(),
    };
    let (mut within, mut max_z, mut sum_z, mut sq) = (0usize, 0.0f64, 0.0, 0.0);
    for &k in &chosen {
        let e = expected(k);
        let n = hist.counts[k] as f64;
        let z = if e > 0.0 { (n - e) / e.sqrt() } else { 0.0 };
        if z.abs() <= 3.0 {
            within += 1;
        }
        max_z = max_z.max(z.abs());
        sum_z += z;
        let d = n / hist.plateau - analytic.values()[k] / a_plateau;
        sq += d * d;
    }
    let m = chosen.len().max(1) as f64;
    let fraction_within = within as f64 / m;
    Ok(Comparison {
        within_3_sigma: within,
        fraction_within,
        max_abs_z: max_z,
        mean_z: sum_z / m,
        rms_difference: (sq / m).sqrt(),
        passed: !chosen.is_empty() && fraction_within >= 0.99,
        cells: chosen,
    })
}

/// Least-squares slope of `ln d` against `ln n`.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(n, d)| !(n > 0.0 && d > 0.0)) {
        return Err(RelayError::invalid("scaling", "need two or more positive points"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
