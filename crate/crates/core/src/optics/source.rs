use serde::{Deserialize, Serialize};

use crate::error::{
    ensure_non_negative, ensure_positive, ensure_unit_interval, RelayError, Result,
};
use crate::grid::{interp_clamped, Correlator, PeriodicGrid};

use super::profile::peak_of_periodic;
use super::{energy_to_angular_rate, PulseShapeRegistry, TemporalProfile};

/// Samples of a function of `(u, delta)`: `u` is the first photon's time
/// within the period and `delta` the delay of the second photon after it.
/// Periodic in `u`, zero outside the sampled delay range.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGrid {
    grid: PeriodicGrid,
    delay_origin: f64,
    n_delay: usize,
    values: Vec<f64>,
}

impl DelayGrid {
    pub fn from_fn(
        grid: PeriodicGrid,
        delay_origin: f64,
        n_delay: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len * n_delay);
        for i in 0..grid.len {
            for j in 0..n_delay {
                values.push(f(i, j));
            }
        }
        Self {
            grid,
            delay_origin,
            n_delay,
            values,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn delay_origin(&self) -> f64 {
        self.delay_origin
    }

    pub fn n_delay(&self) -> usize {
        self.n_delay
    }

    pub fn delay(&self, j: usize) -> f64 {
        self.delay_origin + j as f64 * self.grid.dt
    }

    pub fn delay_range(&self) -> (f64, f64) {
        (self.delay_origin, self.delay(self.n_delay.saturating_sub(1)))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_delay + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_delay..(i + 1) * self.n_delay]
    }

    /// Bilinear interpolation.
    pub fn eval(&self, u: f64, delta: f64) -> f64 {
        let n = self.grid.len;
        let x = (u / self.grid.dt).rem_euclid(n as f64);
        let i0 = x.floor() as usize % n;
        let f = x - x.floor();
        let i1 = (i0 + 1) % n;
        self.along(i0, delta) * (1.0 - f) + self.along(i1, delta) * f
    }

    /// The slice at fixed delay, sampled at every grid time `u`.
    pub fn column_at(&self, delta: f64) -> Vec<f64> {
        (0..self.grid.len).map(|i| self.along(i, delta)).collect()
    }

    /// As [`DelayGrid::column_at`] but taking the limit from above at the
    /// first delay rather than the mean of both sides.
    pub fn column_from_above(&self, delta: f64) -> Vec<f64> {
        (0..self.grid.len)
            .map(|i| interp_clamped(self.row(i), self.delay_origin, self.grid.dt, delta))
            .collect()
    }

    /// Row `i` at `delta`. The kernel vanishes below the first delay, so a
    /// point exactly on that edge takes the mean of the one-sided limits,
    /// which is what a time bin centered there records.
    fn along(&self, i: usize, delta: f64) -> f64 {
        let row = self.row(i);
        if delta == self.delay_origin {
            return 0.5 * row.first().copied().unwrap_or(0.0);
        }
        interp_clamped(row, self.delay_origin, self.grid.dt, delta)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Two-photon correlation kernel `g2(t_j, t_k)`: an uncorrelated product
/// `weight * I_j(t_j) I_k(t_k)` plus a correlated part on a [`DelayGrid`].
#[derive(Debug, Clone)]
pub struct PairKernel {
    pub first: TemporalProfile,
    pub second: TemporalProfile,
    pub correlated: DelayGrid,
    pub uncorrelated_weight: f64,
}

impl PairKernel {
    /// Clamped at zero: the exact kernel is nonnegative, and bilinear
    /// interpolation of a cancelling sum can dip slightly below it.
    pub fn eval(&self, t_first: f64, t_second: f64) -> f64 {
        let base = if self.uncorrelated_weight != 0.0 {
            self.uncorrelated_weight * self.first.at(t_first) * self.second.at(t_second)
        } else {
            0.0
        };
        (base + self
            .correlated
            .eval(self.first.grid().wrap(t_first), t_second - t_first))
        .max(0.0)
    }
}

/// Radiative-cascade shape `k(u, delta) = I_B(u) * exp(-delta/tau)/tau` for
/// `delta >= 0`. Integrates over `delta` to `I_B(u)` under the trapezoid
/// convention used throughout (half weight on the `delta = 0` node).
pub fn make_cascade_kernel(profile_b: &TemporalProfile, x_lifetime_ps: f64) -> Result<DelayGrid> {
    ensure_positive("source.x_lifetime_ps", x_lifetime_ps)?;
    let grid = profile_b.grid();
    let n_delay = ((12.0 * x_lifetime_ps / grid.dt).ceil() as usize).max(4);
    let raw: Vec<f64> = (0..n_delay)
        .map(|j| (-(j as f64) * grid.dt / x_lifetime_ps).exp())
        .collect();
    let norm = grid.dt * (raw.iter().sum::<f64>() - 0.5 * raw[0]);
    let decay: Vec<f64> = raw.iter().map(|v| v / norm).collect();
    let b = profile_b.samples();
    Ok(DelayGrid::from_fn(grid, 0.0, n_delay, |i, j| b[i] * decay[j]))
}

/// Same-cascade biexciton-exciton kernels `(entangled, unentangled)` for a
/// source emitting exactly one cascade per cycle. The two differ only by the
/// `entangled_fraction` split; pairs from distinct cascades are left to
/// [`SourceModel::g2_bxu`].
pub fn make_cascade_biphoton(
    profile_b: &TemporalProfile,
    x_lifetime_ps: f64,
    entangled_fraction: f64,
) -> Result<(PairKernel, PairKernel)> {
    let params = SourceParams {
        period_ps: profile_b.period(),
        dt_ps: profile_b.grid().dt,
        x_lifetime_ps,
        entangled_fraction,
        pair_prob: 1.0,
        double_pair_prob: 0.0,
        ..SourceParams::default()
    };
    let cascade = make_cascade_kernel(profile_b, x_lifetime_ps)?;
    let source = SourceModel::from_parts(profile_b.clone(), cascade, &params)?;
    Ok((
        source.cascade_pairs(entangled_fraction),
        source.cascade_pairs(1.0 - entangled_fraction),
    ))
}

/// Defaults reproduce the operating point of the pulsed entangled-LED source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    pub period_ps: f64,
    pub dt_ps: f64,
    pub drive_window_ps: f64,
    pub rise_ps: f64,
    pub b_lifetime_ps: f64,
    pub x_lifetime_ps: f64,
    pub fss_uev: f64,
    pub b_coherence_ps: f64,
    pub x_coherence_ps: f64,
    pub eta_b: f64,
    pub eta_x: f64,
    pub entangled_fraction: f64,
    pub pair_prob: f64,
    pub double_pair_prob: f64,
    pub b_profile_path: Option<String>,
    pub bx_kernel_path: Option<String>,
}

/// Entangled fraction that gives a Bell parameter of 2.59 at zero delay for
/// the default source (see `analysis::calibrate_entangled_fraction`).
pub const DEFAULT_ENTANGLED_FRACTION: f64 = 0.98901;
/// Double-pair probability that gives an exciton `g2(0)` of 0.046
/// (see `analysis::calibrate_double_pair_prob`).
pub const DEFAULT_DOUBLE_PAIR_PROB: f64 = 0.02343;

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            period_ps: 4926.0,
            dt_ps: 8.0,
            drive_window_ps: 490.0,
            rise_ps: 100.0,
            b_lifetime_ps: 300.0,
            x_lifetime_ps: 600.0,
            fss_uev: 4.2,
            b_coherence_ps: 141.6,
            x_coherence_ps: 200.0,
            eta_b: 1.0,
            eta_x: 1.0,
            entangled_fraction: DEFAULT_ENTANGLED_FRACTION,
            pair_prob: 1.0,
            double_pair_prob: DEFAULT_DOUBLE_PAIR_PROB,
            b_profile_path: None,
            bx_kernel_path: None,
        }
    }
}

/// The quantum-dot pair source.
///
/// Each cycle emits `K` cascades (`K = 1` with probability
/// `pair_prob - double_pair_prob`, `K = 2` with `double_pair_prob`). A
/// cascade emits B at `u ~ I_B` and X after it following the cascade kernel;
/// it is polarization entangled with probability `entangled_fraction` and an
/// equal HH/HV/VH/VV mixture otherwise.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub profile_b: TemporalProfile,
    pub profile_x: TemporalProfile,
    /// `k(u, delta)`, normalized so that `∫ k du ddelta = period`.
    pub cascade: DelayGrid,
    /// X intensity of one cycle's cascade before wrapping, origin at the
    /// cycle start.
    pub x_local: Vec<f64>,
    pub fss_uev: f64,
    /// Phase precession rate `fss / (2 hbar)` in rad/ps.
    pub s: f64,
    pub b_coherence_ps: f64,
    pub x_coherence_ps: f64,
    pub eta_b: f64,
    pub eta_x: f64,
    pub entangled_fraction: f64,
    pub pair_prob: f64,
    pub double_pair_prob: f64,
}

impl SourceModel {
    pub fn build(params: &SourceParams) -> Result<Self> {
        let grid = PeriodicGrid::new(params.period_ps, params.dt_ps)?;
        let profile_b = TemporalProfile::pulsed_emission(
            grid,
            params.drive_window_ps,
            params.rise_ps,
            params.b_lifetime_ps,
        )?;
        let cascade = make_cascade_kernel(&profile_b, params.x_lifetime_ps)?;
        Self::from_parts(profile_b, cascade, params)
    }

    /// Assembles a source from a measured B profile and cascade kernel.
    pub fn from_parts(
        profile_b: TemporalProfile,
        cascade: DelayGrid,
        params: &SourceParams,
    ) -> Result<Self> {
        ensure_positive("source.b_coherence_ps", params.b_coherence_ps)?;
        ensure_positive("source.x_coherence_ps", params.x_coherence_ps)?;
        ensure_non_negative("source.fss_uev", params.fss_uev)?;
        ensure_positive("source.eta_b", params.eta_b)?;
        ensure_positive("source.eta_x", params.eta_x)?;
        ensure_unit_interval("source.entangled_fraction", params.entangled_fraction)?;
        ensure_unit_interval("source.pair_prob", params.pair_prob)?;
        ensure_unit_interval("source.double_pair_prob", params.double_pair_prob)?;
        if params.double_pair_prob > params.pair_prob {
            return Err(RelayError::invalid(
                "source.double_pair_prob",
                "cannot exceed pair_prob",
            ));
        }
        if params.pair_prob <= 0.0 {
            return Err(RelayError::invalid("source.pair_prob", "must be > 0"));
        }
        let grid = profile_b.grid();
        if !cascade.grid().same_as(&grid) {
            return Err(RelayError::GridMismatch(
                "cascade kernel and B profile use different grids".into(),
            ));
        }
        if cascade.delay_origin() != 0.0 {
            return Err(RelayError::invalid(
                "source.bx_kernel",
                "cascade kernel delays must start at 0 (X follows B)",
            ));
        }
        let x_local = local_x_intensity(&cascade);
        let n = grid.len;
        let mut wrapped = vec![0.0; n];
        for (j, v) in x_local.iter().enumerate() {
            wrapped[j % n] += v;
        }
        let profile_x = TemporalProfile::from_samples(wrapped, grid)?;
        // rescale the cascade so the X profile built from it has unit mean
        let total: f64 = x_local.iter().sum::<f64>() * grid.dt / grid.period;
        let cascade = cascade.scaled(1.0 / total);
        let x_local = x_local.iter().map(|v| v / total).collect();
        Ok(Self {
            profile_b,
            profile_x,
            cascade,
            x_local,
            fss_uev: params.fss_uev,
            s: 0.5 * energy_to_angular_rate(params.fss_uev),
            b_coherence_ps: params.b_coherence_ps,
            x_coherence_ps: params.x_coherence_ps,
            eta_b: params.eta_b,
            eta_x: params.eta_x,
            entangled_fraction: params.entangled_fraction,
            pair_prob: params.pair_prob,
            double_pair_prob: params.double_pair_prob,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.profile_b.grid()
    }

    pub fn period(&self) -> f64 {
        self.grid().period
    }

    /// Mean number of cascades per cycle.
    pub fn mean_cascades(&self) -> f64 {
        self.pair_prob + self.double_pair_prob
    }

    /// Height scale of a same-cascade correlation, `period / mean_cascades`.
    pub fn pair_scale(&self) -> f64 {
        self.period() / self.mean_cascades()
    }

    /// Correction for two distinct cascades sharing one cycle,
    /// `2 q2 / m^2 - 1`.
    pub fn same_cycle_coeff(&self) -> f64 {
        let m = self.mean_cascades();
        2.0 * self.double_pair_prob / (m * m) - 1.0
    }

    /// Correction for three distinct cascades, `2 - 6 q2 / m^2`.
    pub fn triple_coeff(&self) -> f64 {
        let m = self.mean_cascades();
        2.0 - 6.0 * self.double_pair_prob / (m * m)
    }

    /// B intensity of a single cycle: the samples over `[0, period)` with
    /// zeros on either side, linearly interpolated.
    pub fn b_local(&self, w: f64) -> f64 {
        padded_interp(self.profile_b.samples(), self.grid().dt, w)
    }

    /// X intensity of a single cycle's cascades, same conventions as
    /// [`SourceModel::b_local`].
    pub fn x_local_at(&self, w: f64) -> f64 {
        padded_interp(&self.x_local, self.grid().dt, w)
    }

    /// Entangled biexciton-exciton kernel `g2_BXe`.
    pub fn g2_bxe(&self) -> PairKernel {
        self.cascade_pairs(self.entangled_fraction)
    }

    /// B and X from the same cascade, carrying `share` of all cascades.
    pub fn cascade_pairs(&self, share: f64) -> PairKernel {
        PairKernel {
            first: self.profile_b.clone(),
            second: self.profile_x.clone(),
            correlated: self.cascade.scaled(share * self.pair_scale()),
            uncorrelated_weight: 0.0,
        }
    }

    /// Unentangled kernel `g2_BXu`: the mixed share of each cascade plus all
    /// pairs taken from distinct cascades.
    pub fn g2_bxu(&self) -> PairKernel {
        self.bx_kernel(1.0 - self.entangled_fraction)
    }

    /// Total biexciton-exciton kernel, polarization-averaged.
    pub fn g2_bx_total(&self) -> PairKernel {
        self.bx_kernel(1.0)
    }

    fn bx_kernel(&self, cascade_share: f64) -> PairKernel {
        let grid = self.grid();
        let p = grid.period;
        let n_delay_cascade = self.cascade.n_delay();
        let origin = -p;
        let n_delay = 2 * grid.len + n_delay_cascade;
        let c_q = self.same_cycle_coeff();
        let scale = cascade_share * self.pair_scale();
        let b = self.profile_b.samples();
        let correlated = DelayGrid::from_fn(grid, origin, n_delay, |i, j| {
            let delta = origin + j as f64 * grid.dt;
            let u = grid.time(i);
            let mut v = c_q * b[i] * self.x_local_at(u + delta);
            if delta >= 0.0 {
                v += scale * self.cascade.eval(u, delta);
            }
            v
        });
        PairKernel {
            first: self.profile_b.clone(),
            second: self.profile_x.clone(),
            correlated,
            uncorrelated_weight: 1.0,
        }
    }

    /// Biexciton-biexciton kernel between photons of distinct cascades.
    pub fn g2_bb(&self) -> PairKernel {
        let grid = self.grid();
        let c_q = self.same_cycle_coeff();
        let b = self.profile_b.samples();
        let n = grid.len;
        let correlated = DelayGrid::from_fn(grid, -grid.period, 2 * n, |i, j| {
            let w = i as isize + j as isize - n as isize;
            if (0..n as isize).contains(&w) {
                c_q * b[i] * b[w as usize]
            } else {
                0.0
            }
        });
        PairKernel {
            first: self.profile_b.clone(),
            second: self.profile_b.clone(),
            correlated,
            uncorrelated_weight: 1.0,
        }
    }
}

/// Linear interpolation of `values` at `t / dt`, treating the samples just
/// outside the array as zero.
fn padded_interp(values: &[f64], dt: f64, t: f64) -> f64 {
    let x = t / dt;
    let n = values.len() as f64;
    if x <= -1.0 || x >= n {
        return 0.0;
    }
    let i = x.floor();
    let f = x - i;
    let get = |k: f64| {
        if k < 0.0 || k >= n {
            0.0
        } else {
            values[k as usize]
        }
    };
    get(i) * (1.0 - f) + get(i + 1.0) * f
}

/// `x_local(w) = ∫_0^p k(u, w - u) du`, with the half-weight convention on
/// the `delta = 0` node.
fn local_x_intensity(cascade: &DelayGrid) -> Vec<f64> {
    let grid = cascade.grid();
    let n = grid.len;
    let nd = cascade.n_delay();
    let mut out = vec![0.0; n + nd];
    for i in 0..n {
        for j in 0..nd {
            let w = if j == 0 { 0.5 } else { 1.0 };
            out[i + j] += w * cascade.value(i, j) * grid.dt;
        }
    }
    out
}

/// Input-qubit laser pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserModel {
    pub shape: String,
    pub fwhm_ps: f64,
    /// Offset after the position of maximum overlap with the B pulse.
    pub delay_ps: f64,
    /// `eta_L / eta_B`.
    pub relative_intensity: f64,
    /// `omega_B - omega_L` in µeV.
    pub detuning_uev: f64,
    pub coherence_ps: f64,
    pub profile_path: Option<String>,
}

impl Default for LaserModel {
    fn default() -> Self {
        Self {
            shape: "gaussian".into(),
            fwhm_ps: 950.0,
            delay_ps: 600.0,
            relative_intensity: 0.85,
            detuning_uev: 0.12,
            coherence_ps: 10_000.0,
            profile_path: None,
        }
    }
}

impl LaserModel {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("laser.fwhm_ps", self.fwhm_ps)?;
        ensure_non_negative("laser.relative_intensity", self.relative_intensity)?;
        ensure_positive("laser.coherence_ps", self.coherence_ps)?;
        if !self.delay_ps.is_finite() || !self.detuning_uev.is_finite() {
            return Err(RelayError::invalid("laser", "delay and detuning must be finite"));
        }
        Ok(())
    }

    pub fn detuning_rate(&self) -> f64 {
        energy_to_angular_rate(self.detuning_uev)
    }

    /// Envelope `I_L` on the source grid, placed `delay_ps` after the
    /// position of maximum overlap with `I_B`.
    pub fn profile(
        &self,
        source: &SourceModel,
        shapes: &PulseShapeRegistry,
    ) -> Result<TemporalProfile> {
        self.validate()?;
        let grid = source.grid();
        if self.fwhm_ps >= grid.period {
            return Err(RelayError::invalid(
                "laser.fwhm_ps",
                "must be shorter than the period",
            ));
        }
        let shape = shapes.get(&self.shape)?;
        let centered = shape.envelope(grid, self.fwhm_ps, 0.0)?;
        let reference = overlap_reference(&source.profile_b, &centered);
        shape.envelope(grid, self.fwhm_ps, reference + self.delay_ps)
    }
}

/// Center position that maximizes `∫ I_L(t - c) I_B(t) dt` for an envelope
/// `centered` at 0.
pub fn overlap_reference(profile_b: &TemporalProfile, centered: &TemporalProfile) -> f64 {
    let corr = Correlator::new(profile_b.grid().len);
    let r = corr.circular(profile_b.samples(), centered.samples());
    peak_of_periodic(&r, profile_b.grid())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source() -> SourceModel {
        SourceModel::build(&SourceParams::default()).unwrap()
    }

    #[test]
    fn derived_x_profile_has_unit_mean() {
        let s = source();
        assert!((s.profile_x.mean() - 1.0).abs() < 1e-9);
        assert!((s.profile_b.mean() - 1.0).abs() < 1e-9);
        // X follows B
        assert!(s.profile_x.peak_time() > s.profile_b.peak_time());
    }

    #[test]
    fn phase_rate_is_half_the_splitting() {
        let s = source();
        assert!((s.s - 4.2 / 658.212 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cascade_ordering_and_fractions() {
        let s = source();
        let (e, u) = (s.g2_bxe(), s.g2_bxu());
        let tb = s.profile_b.peak_time();
        assert_eq!(e.eval(tb, tb - 50.0), 0.0);
        assert!(e.eval(tb, tb + 50.0) > 0.0);
        let (ce, cu) = make_cascade_biphoton(&s.profile_b, 600.0, 1.0).unwrap();
        for k in 0..50 {
            let t = k as f64 * 97.0;
            assert_eq!(cu.eval(t, t + 40.0), 0.0);
            assert!(ce.eval(t, t + 40.0) >= 0.0);
        }
        let (ce, cu) = make_cascade_biphoton(&s.profile_b, 600.0, 0.25).unwrap();
        let (x, y) = (ce.eval(tb, tb + 90.0), cu.eval(tb, tb + 90.0));
        assert!(x > 0.0 && (y / x - 3.0).abs() < 1e-12);
        assert!(make_cascade_biphoton(&s.profile_b, 0.0, 0.5).is_err());
        assert!(make_cascade_biphoton(&s.profile_b, 600.0, 1.1).is_err());
        assert!(u.eval(tb, tb + 50.0) > 0.0);
    }

    #[test]
    fn kernels_are_nonnegative() {
        let s = source();
        let (e, u, bb) = (s.g2_bxe(), s.g2_bxu(), s.g2_bb());
        for k in 0..400 {
            let t1 = k as f64 * 37.3;
            for d in [-3000.0, -400.0, -8.0, 0.0, 13.0, 500.0, 2200.0, 7000.0] {
                assert!(e.eval(t1, t1 + d) >= 0.0);
                assert!(u.eval(t1, t1 + d) >= -1e-12);
                assert!(bb.eval(t1, t1 + d) >= -1e-12);
            }
        }
    }

    #[test]
    fn biexciton_pairs_are_antibunched() {
        let s = source();
        let bb = s.g2_bb();
        let t = s.profile_b.peak_time();
        let same = bb.eval(t, t);
        let next = bb.eval(t, t + s.period());
        let m = s.mean_cascades();
        assert!((same / next - 2.0 * s.double_pair_prob / (m * m)).abs() < 1e-3);
    }

    #[test]
    fn cascade_marginal_tracks_b_profile() {
        // ∫ k(u, delta) d delta ∝ I_B(u)
        let s = source();
        let g = s.grid();
        let ratio0 = {
            let row = s.cascade.row(40);
            (g.dt * (row.iter().sum::<f64>() - 0.5 * row[0])) / s.profile_b.samples()[40]
        };
        for i in (0..g.len).step_by(17) {
            let b = s.profile_b.samples()[i];
            if b < 1e-6 {
                continue;
            }
            let row = s.cascade.row(i);
            let integral = g.dt * (row.iter().sum::<f64>() - 0.5 * row[0]);
            assert!((integral / b - ratio0).abs() < 1e-6 * ratio0);
        }
    }

    #[test]
    fn invalid_source_parameters() {
        let bad = [
            SourceParams { b_coherence_ps: 0.0, ..SourceParams::default() },
            SourceParams { fss_uev: -1.0, ..SourceParams::default() },
            SourceParams { entangled_fraction: 1.5, ..SourceParams::default() },
            SourceParams { double_pair_prob: 0.6, pair_prob: 0.5, ..SourceParams::default() },
            SourceParams { x_lifetime_ps: 0.0, ..SourceParams::default() },
            SourceParams { eta_b: 0.0, ..SourceParams::default() },
        ];
        for p in bad {
            assert!(SourceModel::build(&p).is_err(), "{p:?}");
        }
    }

    #[test]
    fn laser_sits_delay_after_max_overlap() {
        let s = source();
        let reg = PulseShapeRegistry::with_defaults();
        let zero = LaserModel { delay_ps: 0.0, ..LaserModel::default() };
        let later = LaserModel::default();
        let p0 = zero.profile(&s, &reg).unwrap().peak_time();
        let p1 = later.profile(&s, &reg).unwrap().peak_time();
        assert!((s.grid().wrap(p1 - p0) - 600.0).abs() < 2.0);
        let unknown = LaserModel { shape: "square".into(), ..LaserModel::default() };
        assert!(unknown.profile(&s, &reg).is_err());
    }
}
