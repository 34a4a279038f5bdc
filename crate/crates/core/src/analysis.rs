//! Fidelity maps, Bell parameter, error bars and key rates.

use serde::{Deserialize, Serialize};

use crate::engine::{blur_series, detector_sigma, CorrelationSurface, EngineConfig, TauAxis};
use crate::error::{RelayError, Result};
use crate::grid::{interp_periodic, MAX_STEP_PS};
use crate::optics::{PolarizationState, SourceModel, SourceParams};

/// Classical four-state teleportation bound.
pub const CLASSICAL_LIMIT: f64 = 0.75;
/// Fidelity needed for four-state error correction (QBER 0.2).
pub const CORRECTION_THRESHOLD: f64 = 0.8;
/// Undefined-fidelity floor relative to the largest denominator.
pub const DEFAULT_FLOOR_FRACTION: f64 = 1e-6;

pub fn expected_output(input: PolarizationState) -> PolarizationState {
    input.expected_output()
}

pub fn orthogonal(state: PolarizationState) -> PolarizationState {
    state.orthogonal()
}

/// Fidelity over `(tau2, tau3)`; `None` where too few photons arrive.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityMap {
    axis: TauAxis,
    values: Vec<Option<f64>>,
    /// Expected and unexpected surfaces the map was built from.
    pub counts: Option<(CorrelationSurface, CorrelationSurface)>,
}

impl FidelityMap {
    pub fn from_values(axis: TauAxis, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != axis.len() * axis.len() {
            return Err(RelayError::GridMismatch("fidelity values do not fill the grid".into()));
        }
        Ok(Self { axis, values, counts: None })
    }

    pub fn axis(&self) -> TauAxis {
        self.axis
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, i2: usize, i3: usize) -> Option<f64> {
        self.values[i2 * self.axis.len() + i3]
    }

    pub fn at(&self, tau2: f64, tau3: f64) -> Option<f64> {
        self.get(self.axis.index_of(tau2)?, self.axis.index_of(tau3)?)
    }

    /// Largest defined value and its `(tau2, tau3)`.
    pub fn peak(&self) -> Option<(f64, f64, f64)> {
        self.peak_within(f64::INFINITY)
    }

    /// Largest defined value with both delays within `radius_ps` of zero.
    pub fn peak_within(&self, radius_ps: f64) -> Option<(f64, f64, f64)> {
        let n = self.axis.len();
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 0..n {
            let t2 = self.axis.tau(i);
            if t2.abs() > radius_ps {
                continue;
            }
            for j in 0..n {
                let t3 = self.axis.tau(j);
                if t3.abs() > radius_ps {
                    continue;
                }
                if let Some(v) = self.get(i, j) {
                    if best.map_or(true, |b| v > b.2) {
                        best = Some((t2, t3, v));
                    }
                }
            }
        }
        best
    }

    /// Undefined cells become `NaN`.
    pub fn to_surface(&self) -> CorrelationSurface {
        let v = self.values.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
        CorrelationSurface::from_values(self.axis, v).expect("same grid")
    }
}

/// `F = g_exp / (g_exp + g_unexp)`, undefined where the denominator is
/// below `floor` (default: [`DEFAULT_FLOOR_FRACTION`] of its maximum).
pub fn relay_fidelity(
    expected: &CorrelationSurface,
    unexpected: &CorrelationSurface,
    floor: Option<f64>,
) -> Result<FidelityMap> {
    expected.ensure_same_grid(unexpected)?;
    let sums: Vec<f64> = expected
        .values()
        .iter()
        .zip(unexpected.values())
        .map(|(a, b)| a + b)
        .collect();
    let eps = floor.unwrap_or_else(|| {
        DEFAULT_FLOOR_FRACTION * sums.iter().copied().fold(0.0, f64::max)
    });
    let values = expected
        .values()
        .iter()
        .zip(&sums)
        .map(|(&e, &s)| {
            if s < eps || s <= 0.0 {
                None
            } else {
                Some((e / s).clamp(0.0, 1.0))
            }
        })
        .collect();
    Ok(FidelityMap {
        axis: expected.axis(),
        values,
        counts: Some((expected.clone(), unexpected.clone())),
    })
}

/// Pointwise mean, undefined wherever any map is undefined.
pub fn average_fidelity(maps: &[FidelityMap]) -> Result<FidelityMap> {
    let first = maps
        .first()
        .ok_or_else(|| RelayError::invalid("maps", "need at least one map"))?;
    for m in maps {
        if m.axis != first.axis {
            return Err(RelayError::GridMismatch("fidelity maps on different grids".into()));
        }
    }
    let values = (0..first.values.len())
        .map(|k| {
            let mut s = 0.0;
            for m in maps {
                s += m.values[k]?;
            }
            Some(s / maps.len() as f64)
        })
        .collect();
    Ok(FidelityMap {
        axis: first.axis,
        values,
        counts: None,
    })
}

/// Fidelity along `tau2 = tau3` with the reference thresholds. Both
/// thresholds count as met when reached exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalCut {
    pub taus: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub classical_limit: f64,
    pub correction_threshold: f64,
    pub thresholds_inclusive: bool,
}

impl DiagonalCut {
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.taus
            .iter()
            .zip(&self.values)
            .filter_map(|(&t, v)| v.map(|v| (t, v)))
            .fold(None, |best: Option<(f64, f64)>, (t, v)| match best {
                Some(b) if b.1 >= v => Some(b),
                _ => Some((t, v)),
            })
    }
}

pub fn diagonal_cut(map: &FidelityMap) -> DiagonalCut {
    let n = map.axis.len();
    DiagonalCut {
        taus: map.axis.taus(),
        values: (0..n).map(|i| map.get(i, i)).collect(),
        classical_limit: CLASSICAL_LIMIT,
        correction_threshold: CORRECTION_THRESHOLD,
        thresholds_inclusive: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellSeries {
    pub taus: Vec<f64>,
    pub rectilinear: Vec<f64>,
    pub diagonal: Vec<f64>,
    pub s: Vec<f64>,
}

impl BellSeries {
    pub fn at_zero(&self) -> f64 {
        self.s[self.taus.len() / 2]
    }
}

/// Bell parameter `S(tau) = sqrt(2) (C_rect + C_diag)` from the pair
/// contrasts in the rectilinear and diagonal bases, with `tau = t_X - t_B`.
/// Zero delay is taken as the limit from positive delays, since X never
/// precedes its own B.
/// Coincidences are jitter-broadened before the contrasts are formed.
pub fn bell_parameter(source: &SourceModel, cfg: &EngineConfig) -> Result<BellSeries> {
    let axis = cfg.validate(source)?;
    let taus = axis.taus();
    let g = source.grid();
    let n = g.len as f64;
    let cq = source.same_cycle_coeff();
    let scale = source.pair_scale();
    let b = source.profile_b.samples();
    let mut pair = Vec::with_capacity(taus.len());
    let mut background = Vec::with_capacity(taus.len());
    let mut diag = Vec::with_capacity(taus.len());
    for &tau in &taus {
        let k: f64 = source.cascade.column_from_above(tau).iter().sum::<f64>() / n * scale;
        let u: f64 = (0..g.len)
            .map(|i| {
                let w = g.time(i) + tau;
                b[i] * (source.profile_x.at(w) + cq * source.x_local_at(w))
            })
            .sum::<f64>()
            / n;
        let coherence = (-tau.abs() / source.b_coherence_ps).exp() * (2.0 * source.s * tau).cos();
        pair.push(k);
        background.push(u);
        diag.push(k * coherence);
    }
    let sigma = std::f64::consts::SQRT_2 * detector_sigma(cfg.jitter_fwhm_ps, MAX_STEP_PS);
    let sigma = if cfg.jitter_fwhm_ps > 0.0 { sigma } else { 0.0 };
    let blur = |v: &[f64]| blur_series(v, axis.step, sigma);
    let total: Vec<f64> = pair.iter().zip(&background).map(|(a, b)| a + b).collect();
    let (total, pair, diag) = (blur(&total), blur(&pair), blur(&diag));
    let f = source.entangled_fraction;
    let ratio = |num: &[f64]| -> Vec<f64> {
        num.iter()
            .zip(&total)
            .map(|(a, t)| if *t > 0.0 { f * a / t } else { 0.0 })
            .collect()
    };
    let rectilinear = ratio(&pair);
    let diagonal = ratio(&diag);
    let s = rectilinear
        .iter()
        .zip(&diagonal)
        .map(|(r, d)| std::f64::consts::SQRT_2 * (r + d))
        .collect();
    Ok(BellSeries {
        taus,
        rectilinear,
        diagonal,
        s,
    })
}

/// Zero-delay X-X autocorrelation relative to the mean of the peaks at one
/// and two periods, with detector jitter.
pub fn exciton_g2_zero(source: &SourceModel, cfg: &EngineConfig) -> Result<f64> {
    let p = source.period();
    let axis = TauAxis::new(2.0 * p + 400.0, cfg.tau_step_ps)?;
    let g = source.grid();
    let cq = source.same_cycle_coeff();
    let x = source.profile_x.samples();
    let xl = &source.x_local;
    let series: Vec<f64> = axis
        .taus()
        .iter()
        .map(|&tau| {
            let per: f64 = (0..g.len)
                .map(|i| x[i] * interp_periodic(x, g.dt, g.time(i) + tau))
                .sum::<f64>()
                / g.len as f64;
            let loc: f64 = (0..xl.len())
                .map(|i| xl[i] * source.x_local_at(i as f64 * g.dt + tau))
                .sum::<f64>()
                / g.len as f64;
            per + cq * loc
        })
        .collect();
    let sigma = if cfg.jitter_fwhm_ps > 0.0 {
        std::f64::consts::SQRT_2 * detector_sigma(cfg.jitter_fwhm_ps, MAX_STEP_PS)
    } else {
        0.0
    };
    let s = blur_series(&series, axis.step, sigma);
    let at = |t: f64| s[axis.index_of(t).expect("inside the axis")];
    let plateau = (at(p) + at(-p) + at(2.0 * p) + at(-2.0 * p)) / 4.0;
    Ok(at(0.0) / plateau)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(RelayError::invalid("calibration", "target not bracketed"));
    }
    let rising = fhi > flo;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Double-pair probability giving the target exciton `g2(0)`.
pub fn calibrate_double_pair_prob(params: &SourceParams, cfg: &EngineConfig, target: f64) -> Result<f64> {
    bisect(0.0, 0.5 * params.pair_prob, |q| {
        let src = SourceModel::build(&SourceParams {
            double_pair_prob: q,
            ..params.clone()
        })?;
        Ok(exciton_g2_zero(&src, cfg)? - target)
    })
}

/// Entangled fraction giving the target Bell parameter at zero delay. The
/// contrasts are linear in the fraction, so one evaluation suffices.
pub fn calibrate_entangled_fraction(params: &SourceParams, cfg: &EngineConfig, target_s: f64) -> Result<f64> {
    let src = SourceModel::build(&SourceParams {
        entangled_fraction: 1.0,
        ..params.clone()
    })?;
    let s1 = bell_parameter(&src, cfg)?.at_zero();
    let f = target_s / s1;
    if !(0.0..=1.0).contains(&f) {
        return Err(RelayError::invalid(
            "calibration",
            format!("S = {target_s} needs an entangled fraction of {f}"),
        ));
    }
    Ok(f)
}

pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(RelayError::invalid("q", format!("{q} is outside [0, 1]")));
    }
    let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    Ok(h(q) + h(1.0 - q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateInput {
    /// QBER in the {H, V} basis.
    pub q_z: f64,
    /// QBER in the {D, A} basis.
    pub q_x: f64,
}

impl KeyRateInput {
    pub fn new(q_z: f64, q_x: f64) -> Result<Self> {
        for (name, q) in [("q_z", q_z), ("q_x", q_x)] {
            if !(0.0..=0.5).contains(&q) {
                return Err(RelayError::invalid(name, format!("{q} is outside [0, 0.5]")));
            }
        }
        Ok(Self { q_z, q_x })
    }
}

/// Asymptotic BB84 secret-key fraction `1 - h(Q_Z) - h(Q_X)`; negative
/// when no key can be distilled.
pub fn key_rate(input: KeyRateInput) -> Result<f64> {
    let input = KeyRateInput::new(input.q_z, input.q_x)?;
    Ok(1.0 - binary_entropy(input.q_z)? - binary_entropy(input.q_x)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QberClass {
    /// Within Chau's four-state bound (QBER <= 0.2).
    ErrorCorrectableChau,
    /// Within the six-state bound but beyond four-state correction.
    ErrorCorrectable,
    NotCorrectable,
}

/// Largest QBER any known one-way protocol corrects (six-state).
const SIX_STATE_BOUND: f64 = 0.276;

pub fn qber_check(fidelity: f64) -> Result<QberClass> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(RelayError::invalid("fidelity", format!("{fidelity} is outside [0, 1]")));
    }
    let qber = 1.0 - fidelity;
    Ok(if qber <= 1.0 - CORRECTION_THRESHOLD + 1e-12 {
        QberClass::ErrorCorrectableChau
    } else if qber <= SIX_STATE_BOUND {
        QberClass::ErrorCorrectable
    } else {
        QberClass::NotCorrectable
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityError {
    pub fidelity: f64,
    pub sigma: f64,
    /// First-order propagation gives zero when one count is zero; the true
    /// uncertainty is then of order `1 / N`.
    pub at_boundary: bool,
}

/// First-order Poisson error of `F = n_co / (n_co + n_cross)`:
/// `sigma_F = sqrt(n_co * n_cross) / N^(3/2)`.
pub fn poisson_fidelity_error(n_co: f64, n_cross: f64) -> Result<FidelityError> {
    if !(n_co >= 0.0 && n_cross >= 0.0) || n_co + n_cross <= 0.0 {
        return Err(RelayError::invalid("counts", "need nonnegative counts with a positive total"));
    }
    let n = n_co + n_cross;
    Ok(FidelityError {
        fidelity: n_co / n,
        sigma: (n_co * n_cross).sqrt() / n.powf(1.5),
        at_boundary: n_co == 0.0 || n_cross == 0.0,
    })
}
