//! Uniform periodic time grids and the FFT cross-correlations the engine is
//! built on.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_positive, RelayError, Result};

/// Upper bound on any quadrature or profile step, set by the counting hardware.
pub const MAX_STEP_PS: f64 = 16.0;

/// A uniform grid of `len` points covering one repetition period.
///
/// The requested step is adjusted so that an integer number of steps spans
/// the period exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    pub len: usize,
    pub dt: f64,
    pub period: f64,
}

impl PeriodicGrid {
    pub fn new(period: f64, requested_dt: f64) -> Result<Self> {
        ensure_positive("period_ps", period)?;
        ensure_positive("dt_ps", requested_dt)?;
        if requested_dt > MAX_STEP_PS {
            return Err(RelayError::invalid(
                "dt_ps",
                format!("must be <= {MAX_STEP_PS} ps, got {requested_dt}"),
            ));
        }
        if requested_dt >= period {
            return Err(RelayError::invalid("dt_ps", "must be smaller than the period"));
        }
        let len = (period / requested_dt).round().max(2.0) as usize;
        Ok(Self {
            len,
            dt: period / len as f64,
            period,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Wraps `t` into `[0, period)`.
    pub fn wrap(&self, t: f64) -> f64 {
        let w = t.rem_euclid(self.period);
        if w >= self.period {
            0.0
        } else {
            w
        }
    }

    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        self.len == other.len && (self.period - other.period).abs() < 1e-9
    }
}

/// Linear interpolation of periodic samples `values` (spacing `dt`) at `t`.
pub fn interp_periodic(values: &[f64], dt: f64, t: f64) -> f64 {
    let n = values.len();
    let x = (t / dt).rem_euclid(n as f64);
    let i = x.floor() as usize % n;
    let f = x - x.floor();
    let j = (i + 1) % n;
    values[i] * (1.0 - f) + values[j] * f
}

/// Linear interpolation of samples starting at `origin` with spacing `dt`;
/// zero outside the sampled range.
pub fn interp_clamped(values: &[f64], origin: f64, dt: f64, t: f64) -> f64 {
    let x = (t - origin) / dt;
    if x < 0.0 || values.is_empty() {
        return 0.0;
    }
    let i = x.floor() as usize;
    if i + 1 >= values.len() {
        return if i + 1 == values.len() && x - i as f64 == 0.0 {
            values[i]
        } else {
            0.0
        };
    }
    let f = x - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Cached FFT plans for circular (length `n`) and zero-padded linear
/// (length `2n`) cross-correlations.
pub struct Correlator {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl Correlator {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd2: planner.plan_fft_forward(2 * n),
            inv2: planner.plan_fft_inverse(2 * n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spectrum(&self, a: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(a.len(), self.n);
        let mut buf: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn padded_spectrum(&self, a: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(a.len(), self.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * self.n];
        for (b, &x) in buf.iter_mut().zip(a) {
            b.re = x;
        }
        self.fwd2.process(&mut buf);
        buf
    }

    /// `r[s] = sum_u a[(u + s) mod n] * b[u]`, given the spectrum of `a`.
    pub fn circular_with(&self, a_spec: &[Complex64], b: &[f64]) -> Vec<f64> {
        let b_spec = self.spectrum(b);
        let mut prod: Vec<Complex64> = a_spec
            .iter()
            .zip(&b_spec)
            .map(|(x, y)| x * y.conj())
            .collect();
        self.inv.process(&mut prod);
        let scale = 1.0 / self.n as f64;
        prod.iter().map(|c| c.re * scale).collect()
    }

    pub fn circular(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let spec = self.spectrum(a);
        self.circular_with(&spec, b)
    }

    /// Linear cross-correlation with both sequences zero outside `[0, n)`.
    /// Entry `s + n` holds the lag `s` for `s` in `(-n, n)`.
    pub fn linear_with(&self, a_padded_spec: &[Complex64], b: &[f64]) -> Vec<f64> {
        let b_spec = self.padded_spectrum(b);
        let mut prod: Vec<Complex64> = a_padded_spec
            .iter()
            .zip(&b_spec)
            .map(|(x, y)| x * y.conj())
            .collect();
        self.inv2.process(&mut prod);
        let n2 = 2 * self.n;
        let scale = 1.0 / n2 as f64;
        // circular index of lag s is s mod 2n; reorder so lag -n sits at 0
        (0..n2)
            .map(|i| {
                let lag = i as isize - self.n as isize;
                prod[lag.rem_euclid(n2 as isize) as usize].re * scale
            })
            .collect()
    }
}

/// Evaluates a linear cross-correlation produced by [`Correlator::linear_with`]
/// at a fractional lag `shift / dt`.
pub fn interp_linear_lag(corr: &[f64], n: usize, dt: f64, shift: f64) -> f64 {
    let x = shift / dt + n as f64;
    if x < 0.0 {
        return 0.0;
    }
    let i = x.floor() as usize;
    if i + 1 >= corr.len() {
        return 0.0;
    }
    let f = x - i as f64;
    corr[i] * (1.0 - f) + corr[i + 1] * f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_adjusted_to_divide_the_period() {
        let g = PeriodicGrid::new(4926.0, 8.0).unwrap();
        assert_eq!(g.len, 616);
        assert!((g.dt * g.len as f64 - 4926.0).abs() < 1e-9);
        assert!(PeriodicGrid::new(4926.0, 17.0).is_err());
        assert!(PeriodicGrid::new(-1.0, 8.0).is_err());
    }

    #[test]
    fn circular_matches_direct_sum() {
        let a: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() + 1.5).collect();
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.3).cos()).collect();
        let c = Correlator::new(12);
        let r = c.circular(&a, &b);
        for s in 0..12 {
            let direct: f64 = (0..12).map(|u| a[(u + s) % 12] * b[u]).sum();
            assert!((r[s] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_matches_direct_sum() {
        let n = 9;
        let a: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let b: Vec<f64> = (0..n).map(|i| (i * i) as f64 * 0.1).collect();
        let c = Correlator::new(n);
        let r = c.linear_with(&c.padded_spectrum(&a), &b);
        for s in -(n as isize - 1)..(n as isize) {
            let direct: f64 = (0..n as isize)
                .filter(|u| (0..n as isize).contains(&(u + s)))
                .map(|u| a[(u + s) as usize] * b[u as usize])
                .sum();
            assert!((r[(s + n as isize) as usize] - direct).abs() < 1e-9, "lag {s}");
        }
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert!((interp_periodic(&v, 1.0, 3.5) - 1.5).abs() < 1e-12);
        assert!((interp_periodic(&v, 1.0, -0.5) - 1.5).abs() < 1e-12);
        assert!((interp_periodic(&v, 1.0, 5.25) - 1.25).abs() < 1e-12);
    }
}
