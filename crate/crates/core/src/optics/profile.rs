use statrs::function::erf::erf;

use crate::error::{ensure_positive, RelayError, Result};
use crate::grid::{interp_periodic, PeriodicGrid};

/// Mean-normalized periodic intensity `I(t)` sampled on a [`PeriodicGrid`].
///
/// Samples are nonnegative and average to exactly 1 over one period; the
/// absolute scale of a photon stream lives in its mean-intensity field.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProfile {
    samples: Vec<f64>,
    grid: PeriodicGrid,
}

/// Start of the drive window within each period.
pub const DRIVE_LEAD_PS: f64 = 100.0;

impl TemporalProfile {
    /// Normalizes `samples` to unit mean.
    pub fn from_samples(samples: Vec<f64>, grid: PeriodicGrid) -> Result<Self> {
        if samples.len() != grid.len {
            return Err(RelayError::GridMismatch(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.len
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(RelayError::invalid(
                "profile",
                format!("samples must be finite and >= 0, found {bad}"),
            ));
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        if mean <= 0.0 {
            return Err(RelayError::invalid("profile", "profile is identically zero"));
        }
        let samples = samples.into_iter().map(|v| v / mean).collect();
        Ok(Self { samples, grid })
    }

    pub fn constant(grid: PeriodicGrid) -> Self {
        Self {
            samples: vec![1.0; grid.len],
            grid,
        }
    }

    /// Quantum-dot emission shape: a rectangular drive window smoothed by an
    /// exponential rise, then convolved with the radiative decay. The drive
    /// starts [`DRIVE_LEAD_PS`] into the period so that the cycle boundary
    /// sits in the dark tail.
    pub fn pulsed_emission(
        grid: PeriodicGrid,
        drive_window_ps: f64,
        rise_ps: f64,
        lifetime_ps: f64,
    ) -> Result<Self> {
        ensure_positive("drive_window_ps", drive_window_ps)?;
        ensure_positive("rise_ps", rise_ps)?;
        ensure_positive("lifetime_ps", lifetime_ps)?;
        if drive_window_ps + DRIVE_LEAD_PS >= grid.period {
            return Err(RelayError::invalid(
                "drive_window_ps",
                "drive window must be shorter than the period",
            ));
        }
        let drive: Vec<f64> = (0..grid.len)
            .map(|k| {
                let lo = grid.time(k) - 0.5 * grid.dt;
                let hi = lo + grid.dt;
                let (start, end) = (DRIVE_LEAD_PS, DRIVE_LEAD_PS + drive_window_ps);
                (hi.min(end) - lo.max(start)).clamp(0.0, grid.dt) / grid.dt
            })
            .collect();
        let excited = periodic_convolve(&drive, &exponential_cell_mass(grid, rise_ps));
        let emitted = periodic_convolve(&excited, &exponential_cell_mass(grid, lifetime_ps));
        Self::from_samples(emitted, grid)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn period(&self) -> f64 {
        self.grid.period
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Value at an arbitrary time (periodic, linear interpolation).
    pub fn at(&self, t: f64) -> f64 {
        interp_periodic(&self.samples, self.grid.dt, t)
    }

    /// Profile shifted later in time by `shift_ps`.
    pub fn shifted(&self, shift_ps: f64) -> Self {
        let samples = (0..self.grid.len)
            .map(|k| self.at(self.grid.time(k) - shift_ps))
            .collect();
        Self::from_samples(samples, self.grid).expect("shift keeps a valid profile")
    }

    /// Time of the maximum, refined by a parabola through the top three samples.
    pub fn peak_time(&self) -> f64 {
        peak_of_periodic(&self.samples, self.grid)
    }
}

pub(crate) fn peak_of_periodic(values: &[f64], grid: PeriodicGrid) -> f64 {
    let n = values.len();
    let (i, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let l = values[(i + n - 1) % n];
    let c = values[i];
    let r = values[(i + 1) % n];
    let denom = l - 2.0 * c + r;
    let off = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    grid.wrap((i as f64 + off.clamp(-0.5, 0.5)) * grid.dt)
}

/// Probability mass of a unit exponential in each grid cell `[k dt, (k+1) dt)`,
/// wrapped onto the period.
fn exponential_cell_mass(grid: PeriodicGrid, tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len];
    let per_period = (-grid.period / tau).exp();
    let wrap = 1.0 / (1.0 - per_period);
    for (k, v) in out.iter_mut().enumerate() {
        let a = (-(k as f64) * grid.dt / tau).exp();
        let b = (-((k + 1) as f64) * grid.dt / tau).exp();
        *v = (a - b) * wrap;
    }
    out
}

fn periodic_convolve(signal: &[f64], kernel_mass: &[f64]) -> Vec<f64> {
    let n = signal.len();
    (0..n)
        .map(|s| {
            (0..n)
                .map(|u| signal[(s + n - u) % n] * kernel_mass[u])
                .sum()
        })
        .collect()
}

/// Gaussian of the given FWHM centered at `delay_ps`, wrapped onto the period
/// and cell-averaged so that even sub-step pulses keep their full weight.
pub fn make_gaussian_pulse(
    fwhm_ps: f64,
    delay_ps: f64,
    period_ps: f64,
    dt_ps: f64,
) -> Result<TemporalProfile> {
    ensure_positive("fwhm_ps", fwhm_ps)?;
    if !delay_ps.is_finite() {
        return Err(RelayError::invalid("delay_ps", "must be finite"));
    }
    let grid = PeriodicGrid::new(period_ps, dt_ps)?;
    if period_ps <= fwhm_ps {
        return Err(RelayError::invalid("fwhm_ps", "must be shorter than the period"));
    }
    gaussian_on_grid(grid, fwhm_ps, delay_ps)
}

pub(crate) fn gaussian_on_grid(
    grid: PeriodicGrid,
    fwhm_ps: f64,
    center_ps: f64,
) -> Result<TemporalProfile> {
    let sigma = fwhm_ps / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let center = grid.wrap(center_ps);
    let images = (6.0 * sigma / grid.period).ceil() as i64 + 1;
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / (sigma * std::f64::consts::SQRT_2)));
    let samples = (0..grid.len)
        .map(|k| {
            let lo = grid.time(k) - 0.5 * grid.dt;
            let hi = lo + grid.dt;
            (-images..=images)
                .map(|m| {
                    let c = center + m as f64 * grid.period;
                    cdf(hi - c) - cdf(lo - c)
                })
                .sum::<f64>()
                / grid.dt
        })
        .collect();
    TemporalProfile::from_samples(samples, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_maxima(v: &[f64]) -> usize {
        let n = v.len();
        (0..n)
            .filter(|&i| v[i] > v[(i + n - 1) % n] && v[i] >= v[(i + 1) % n])
            .count()
    }

    #[test]
    fn gaussian_operating_point() {
        let p = make_gaussian_pulse(950.0, 600.0, 4926.0, 8.0).unwrap();
        assert!((p.mean() - 1.0).abs() < 1e-9);
        assert_eq!(local_maxima(p.samples()), 1);
        assert!((p.peak_time() - 600.0).abs() < 1.0);
        // FWHM from the samples
        let peak = p.at(600.0);
        assert!((p.at(600.0 + 475.0) / peak - 0.5).abs() < 0.01);
    }

    #[test]
    fn near_delta_pulse_keeps_unit_mean() {
        let p = make_gaussian_pulse(1.0, 123.4, 4926.0, 16.0).unwrap();
        let integral: f64 = p.samples().iter().sum::<f64>() * p.grid().dt;
        assert!((integral - 4926.0).abs() < 1e-6);
        assert!((p.mean() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn delay_is_periodic() {
        let a = make_gaussian_pulse(950.0, 0.0, 4926.0, 8.0).unwrap();
        let b = make_gaussian_pulse(950.0, 4926.0, 4926.0, 8.0).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_pulse_parameters() {
        assert!(make_gaussian_pulse(0.0, 0.0, 4926.0, 8.0).is_err());
        assert!(make_gaussian_pulse(950.0, 0.0, 4926.0, 0.0).is_err());
        assert!(make_gaussian_pulse(950.0, 0.0, -1.0, 8.0).is_err());
        assert!(make_gaussian_pulse(6000.0, 0.0, 4926.0, 8.0).is_err());
    }

    #[test]
    fn emission_profile_is_pulsed_and_normalized() {
        let grid = PeriodicGrid::new(4926.0, 8.0).unwrap();
        let p = TemporalProfile::pulsed_emission(grid, 490.0, 100.0, 300.0).unwrap();
        assert!((p.mean() - 1.0).abs() < 1e-9);
        assert!(p.samples().iter().all(|&v| v >= 0.0));
        let peak = p.peak_time();
        assert!(peak > 300.0 && peak < 800.0, "peak at {peak}");
        // well contained within the cycle
        assert!(p.at(4000.0) < 1e-2 * p.at(peak));
    }

    #[test]
    fn rejects_negative_samples() {
        let grid = PeriodicGrid::new(100.0, 10.0).unwrap();
        let mut s = vec![1.0; 10];
        s[3] = -0.1;
        assert!(TemporalProfile::from_samples(s, grid).is_err());
        assert!(TemporalProfile::from_samples(vec![0.0; 10], grid).is_err());
    }
}
