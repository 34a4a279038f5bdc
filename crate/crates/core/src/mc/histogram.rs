use rayon::prelude::*;
use serde::Serialize;

use super::{Detector, EventStream};
use crate::engine::{CorrelationSurface, TauAxis};
use crate::error::{RelayError, Result};

/// Flat indices of the cells whose three detections fall in three distinct
/// cycles: `p x p` blocks centered on `(p, -p)` and `(-p, p)`.
pub fn plateau_cells(axis: TauAxis, period: f64) -> Result<Vec<usize>> {
    if axis.extent() < 1.5 * period {
        return Err(RelayError::invalid(
            "grid",
            format!("the plateau needs delays out to 1.5 periods ({} ps)", 1.5 * period),
        ));
    }
    let n = axis.len();
    let taus = axis.taus();
    let near = |t: f64, c: f64| (t - c).abs() < 0.5 * period;
    let mut cells = Vec::new();
    for (i, &t2) in taus.iter().enumerate() {
        for (j, &t3) in taus.iter().enumerate() {
            if (near(t2, period) && near(t3, -period)) || (near(t2, -period) && near(t3, period)) {
                cells.push(i * n + j);
            }
        }
    }
    Ok(cells)
}

/// Mean of `values` over `cells`.
pub(crate) fn cell_mean(values: &[f64], cells: &[usize]) -> f64 {
    cells.iter().map(|&k| values[k]).sum::<f64>() / cells.len() as f64
}

#[derive(Debug, Clone)]
pub struct G3Histogram {
    /// Triple counts, row-major with `tau2` selecting the row.
    pub counts: Vec<u64>,
    /// Counts divided by the plateau.
    pub surface: CorrelationSurface,
    /// Mean count per cell over [`plateau_cells`].
    pub plateau: f64,
    pub n_triples: u64,
}

/// Histogram of every `(D1, D2, x_detector)` triple with
/// `tau2 = t3 - t1` and `tau3 = t3 - t2` on the grid, normalized by the
/// uncorrelated plateau. Without triples the surface is all zero.
pub fn histogram_g3(stream: &EventStream, x_detector: Detector, axis: TauAxis) -> Result<G3Histogram> {
    let cells = plateau_cells(axis, stream.period_ps)?;
    let t1 = stream.times(Detector::D1);
    let t2 = stream.times(Detector::D2);
    let t3 = stream.times(x_detector);
    let n = axis.len();
    let step = axis.step.round() as i64;
    let half = axis.half as i64;
    let reach = half * step;
    let window = |v: &[i64], t: i64| {
        let lo = v.partition_point(|&x| x < t - reach);
        let hi = v.partition_point(|&x| x <= t + reach);
        lo..hi
    };
    let index = |d: i64| -> Option<usize> {
        if d % step != 0 {
            return None;
        }
        let k = d / step + half;
        (0..n as i64).contains(&k).then_some(k as usize)
    };
    let chunk = (t3.len() / 16).max(1024);
    let counts = t3
        .par_chunks(chunk)
        .map(|c| {
            let mut acc = vec![0u64; n * n];
            for &x in c {
                let r1 = window(&t1, x);
                let r2 = window(&t2, x);
                for &a in &t1[r1] {
                    let Some(i) = index(x - a) else { continue };
                    for &b in &t2[r2.clone()] {
                        if let Some(j) = index(x - b) {
                            acc[i * n + j] += 1;
                        }
                    }
                }
            }
            acc
        })
        .reduce(
            || vec![0u64; n * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n_triples = counts.iter().sum();
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let plateau = cell_mean(&as_f, &cells);
    let values = if plateau > 0.0 {
        as_f.iter().map(|c| c / plateau).collect()
    } else {
        vec![0.0; n * n]
    };
    Ok(G3Histogram {
        counts,
        surface: CorrelationSurface::from_values(axis, values)?,
        plateau,
        n_triples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Series {
    pub taus: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts relative to the mean of the bins at one and two periods.
    pub values: Vec<f64>,
    pub plateau: f64,
}

impl G2Series {
    pub fn at(&self, tau: f64) -> Option<f64> {
        let step = self.taus.get(1)? - self.taus[0];
        let k = ((tau - self.taus[0]) / step).round();
        (k >= 0.0 && (k as usize) < self.taus.len()).then(|| self.values[k as usize])
    }
}

/// Coincidences of `pair.1` at `tau` after `pair.0`, distinct events only.
pub fn histogram_g2(stream: &EventStream, pair: (Detector, Detector), axis: TauAxis) -> Result<G2Series> {
    let p = stream.period_ps;
    if axis.extent() < 2.0 * p {
        return Err(RelayError::invalid("grid", "g2 plateau needs delays out to two periods"));
    }
    let first: Vec<(i64, usize)> = stream
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.detector == pair.0)
        .map(|(k, e)| (e.time_ps, k))
        .collect();
    let second: Vec<(i64, usize)> = stream
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.detector == pair.1)
        .map(|(k, e)| (e.time_ps, k))
        .collect();
    let n = axis.len();
    let step = axis.step.round() as i64;
    let half = axis.half as i64;
    let reach = half * step;
    let mut counts = vec![0u64; n];
    for &(t, k) in &first {
        let lo = second.partition_point(|&(x, _)| x < t - reach);
        for &(x, m) in &second[lo..] {
            if x > t + reach {
                break;
            }
            let d = x - t;
            if m == k || d % step != 0 {
                continue;
            }
            counts[(d / step + half) as usize] += 1;
        }
    }
    let taus = axis.taus();
    let at = |t: f64| counts[axis.index_of(t).expect("inside the axis")] as f64;
    let plateau = (at(p) + at(-p) + at(2.0 * p) + at(-2.0 * p)) / 4.0;
    let values = counts
        .iter()
        .map(|&c| if plateau > 0.0 { c as f64 / plateau } else { 0.0 })
        .collect();
    Ok(G2Series {
        taus,
        counts,
        values,
        plateau,
    })
}
