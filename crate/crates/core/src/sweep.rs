//! Laser pulse width and delay scan, optimizing the relative intensity at
//! every point for the largest windowed four-state fidelity.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_FLOOR_FRACTION;
use crate::engine::{Engine, EngineConfig, SourcePart, Strategies, Window};
use crate::error::{RelayError, Result};
use crate::optics::{LaserModel, PolarizationState, PulseShapeRegistry, SourceModel};

/// Largest `eta_L / eta_B` considered by default.
pub const DEFAULT_INTENSITY_CAP: f64 = 3.5;

/// Inclusive `min..=max` in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Span {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn single(v: f64) -> Self {
        Self { min: v, max: v, step: 1.0 }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(RelayError::invalid(name, "needs finite min <= max"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(RelayError::invalid(name, "step must be > 0"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.min + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Laser FWHM in ps.
    pub width_ps: Span,
    /// Laser delay in ps.
    pub delay_ps: Span,
    pub intensity_cap: f64,
    /// Absolute precision of the intensity line search.
    pub intensity_tolerance: f64,
    /// Name of the registered intensity search.
    pub search: String,
    /// Half size of the square around the origin searched for the peak.
    pub peak_radius_ps: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            width_ps: Span::new(250.0, 2_350.0, 150.0),
            delay_ps: Span::new(-1_000.0, 1_800.0, 200.0),
            intensity_cap: DEFAULT_INTENSITY_CAP,
            intensity_tolerance: 1e-3,
            search: "golden".into(),
            peak_radius_ps: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.width_ps.validate("sweep.width_ps")?;
        self.delay_ps.validate("sweep.delay_ps")?;
        if self.width_ps.min <= 0.0 {
            return Err(RelayError::invalid("sweep.width_ps", "widths must be > 0"));
        }
        if !(self.intensity_cap > 0.0 && self.intensity_cap.is_finite()) {
            return Err(RelayError::invalid("sweep.intensity_cap", "must be > 0"));
        }
        if !(self.intensity_tolerance > 0.0 && self.intensity_tolerance < self.intensity_cap) {
            return Err(RelayError::invalid("sweep.intensity_tolerance", "must be in (0, cap)"));
        }
        if let Some(r) = self.peak_radius_ps {
            if !(r >= 0.0) {
                return Err(RelayError::invalid("sweep.peak_radius_ps", "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Finds the intensity in `(0, cap]` that maximizes an objective.
pub trait IntensitySearch: Send + Sync {
    fn name(&self) -> &str;
    /// Returns `(intensity, value)`; equal values resolve to the smaller
    /// intensity.
    fn maximize(&self, f: &dyn Fn(f64) -> Result<f64>, cap: f64, tolerance: f64) -> Result<(f64, f64)>;
}

fn better(candidate: (f64, f64), best: (f64, f64)) -> bool {
    candidate.1 > best.1 || (candidate.1 == best.1 && candidate.0 < best.0)
}

/// Eight-point pre-scan, then golden-section search inside the bracket
/// around the best scan point.
pub struct GoldenSearch;

impl IntensitySearch for GoldenSearch {
    fn name(&self) -> &str {
        "golden"
    }

    fn maximize(&self, f: &dyn Fn(f64) -> Result<f64>, cap: f64, tolerance: f64) -> Result<(f64, f64)> {
        const SCAN: usize = 8;
        let xs: Vec<f64> = (1..=SCAN).map(|k| cap * k as f64 / SCAN as f64).collect();
        let mut best = (xs[0], f(xs[0])?);
        let mut at = 0;
        for (k, &x) in xs.iter().enumerate().skip(1) {
            let c = (x, f(x)?);
            if better(c, best) {
                best = c;
                at = k;
            }
        }
        let mut lo = if at == 0 { 0.0 } else { xs[at - 1] };
        let mut hi = if at + 1 < SCAN { xs[at + 1] } else { cap };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        while hi - lo > tolerance {
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = f(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = f(d)?;
            }
        }
        for cand in [(c, fc), (d, fd)] {
            if better(cand, best) {
                best = cand;
            }
        }
        Ok(best)
    }
}

/// Uniform scan at the tolerance spacing. Slow; a reference for the
/// golden search.
pub struct ScanSearch;

impl IntensitySearch for ScanSearch {
    fn name(&self) -> &str {
        "scan"
    }

    fn maximize(&self, f: &dyn Fn(f64) -> Result<f64>, cap: f64, tolerance: f64) -> Result<(f64, f64)> {
        let n = (cap / tolerance).ceil().max(1.0) as usize;
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for k in 1..=n {
            let x = cap * k as f64 / n as f64;
            let c = (x, f(x)?);
            if best.0.is_nan() || better(c, best) {
                best = c;
            }
        }
        Ok(best)
    }
}

pub struct SearchRegistry {
    searches: Vec<Arc<dyn IntensitySearch>>,
}

impl SearchRegistry {
    pub fn with_defaults() -> Self {
        Self {
            searches: vec![Arc::new(GoldenSearch), Arc::new(ScanSearch)],
        }
    }

    pub fn register(&mut self, search: Arc<dyn IntensitySearch>) {
        self.searches.retain(|s| s.name() != search.name());
        self.searches.push(search);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn IntensitySearch>> {
        self.searches
            .iter()
            .find(|s| s.name() == name)
            .cloned()
            .ok_or_else(|| RelayError::UnknownStrategy {
                kind: "intensity search",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.searches.iter().map(|s| s.name().to_string()).collect()
    }
}

impl Default for SearchRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

/// Delay margin kept around the searched square so that grid edges do not
/// reach it through the jitter or the window.
const PROBE_MARGIN_PS: f64 = 320.0;

/// Shared state for fidelity evaluations at many laser settings: the
/// laser-independent components are computed once.
pub struct FidelityProbe {
    part: SourcePart,
    pulses: PulseShapeRegistry,
    base: LaserModel,
    window: Window,
    radius_ps: f64,
}

impl FidelityProbe {
    /// `base` supplies the laser settings that are not scanned; the peak is
    /// searched within `radius_ps` of the origin (one period when `None`).
    /// The delay grid is trimmed to what that square needs.
    pub fn new(
        source: Arc<SourceModel>,
        base: &LaserModel,
        cfg: &EngineConfig,
        window: &Window,
        radius_ps: Option<f64>,
        strategies: &Strategies,
    ) -> Result<Self> {
        let radius_ps = radius_ps.unwrap_or(source.period());
        if !(radius_ps >= 0.0 && radius_ps.is_finite()) {
            return Err(RelayError::invalid("sweep.peak_radius_ps", "must be >= 0"));
        }
        let full = cfg.tau_range_ps.unwrap_or(2.0 * source.period());
        let cfg = EngineConfig {
            tau_range_ps: Some(full.min(radius_ps + PROBE_MARGIN_PS)),
            ..cfg.clone()
        };
        Ok(Self {
            part: SourcePart::new(source, &cfg, strategies)?,
            pulses: strategies.pulses.clone(),
            base: base.clone(),
            window: *window,
            radius_ps,
        })
    }

    /// Windowed surfaces for one pulse width and delay, reduced to their
    /// dependence on the relative intensity.
    pub fn laser(&self, width_ps: f64, delay_ps: f64) -> Result<LaserPoint> {
        let laser = LaserModel {
            fwhm_ps: width_ps,
            delay_ps,
            relative_intensity: 0.0,
            ..self.base.clone()
        };
        let engine = self.part.with_laser(&laser, &self.pulses)?.windowed(&self.window)?;
        LaserPoint::new(&engine, self.radius_ps)
    }

    /// Largest windowed four-state average fidelity near the origin.
    pub fn peak_fidelity_at(&self, width_ps: f64, delay_ps: f64, intensity: f64) -> Result<f64> {
        self.laser(width_ps, delay_ps)?.peak_fidelity(intensity)
    }
}

const STATES: [PolarizationState; 4] =
    [PolarizationState::H, PolarizationState::V, PolarizationState::D, PolarizationState::A];

/// Quadratic coefficients in `r = eta_L / eta_B` of one surface before
/// normalization: the two-biexciton term is constant, the laser terms are
/// linear and the two-laser term is quadratic. The normalization cancels in
/// the fidelity.
struct Quadratic([Vec<f64>; 3]);

impl Quadratic {
    fn fit(at: [Vec<f64>; 3]) -> Self {
        let [p0, p1, p2] = at;
        let c: Vec<f64> = (0..p0.len()).map(|k| 0.5 * (p2[k] - 2.0 * p1[k] + p0[k])).collect();
        let b: Vec<f64> = (0..p0.len()).map(|k| p1[k] - p0[k] - c[k]).collect();
        Self([p0, b, c])
    }

    fn at(&self, k: usize, r: f64) -> f64 {
        self.0[0][k] + r * (self.0[1][k] + r * self.0[2][k])
    }
}

/// One laser setting, ready for fast evaluation at any intensity over the
/// cells within the search radius.
pub struct LaserPoint {
    cells: Vec<(f64, f64)>,
    /// Expected-outcome and total surfaces per input state.
    states: Vec<(Quadratic, Quadratic)>,
}

impl LaserPoint {
    fn new(engine: &Engine, radius_ps: f64) -> Result<Self> {
        let axis = engine.axis();
        let n = axis.len();
        let mut cells = Vec::new();
        let mut index = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (t2, t3) = (axis.tau(i), axis.tau(j));
                if t2.abs() <= radius_ps && t3.abs() <= radius_ps {
                    cells.push((t2, t3));
                    index.push(i * n + j);
                }
            }
        }
        if cells.is_empty() {
            return Err(RelayError::invalid("sweep.peak_radius_ps", "covers no grid cell"));
        }
        let states = STATES
            .iter()
            .map(|&input| {
                let good = input.expected_output();
                let sample = |r: f64| {
                    let e = engine.with_intensity(r);
                    let unnorm = 1.0 / e.normalization_factor(input);
                    let g = e.surface(input, good);
                    let b = e.surface(input, good.orthogonal());
                    let gv: Vec<f64> = index.iter().map(|&k| g.values()[k] * unnorm).collect();
                    let tv: Vec<f64> = index
                        .iter()
                        .map(|&k| (g.values()[k] + b.values()[k]) * unnorm)
                        .collect();
                    (gv, tv)
                };
                let (g0, t0) = sample(0.0);
                let (g1, t1) = sample(1.0);
                let (g2, t2) = sample(2.0);
                (Quadratic::fit([g0, g1, g2]), Quadratic::fit([t0, t1, t2]))
            })
            .collect();
        Ok(Self { cells, states })
    }

    /// Largest four-state average fidelity and its `(tau2, tau3)`. A cell is
    /// undefined when any state's total falls below
    /// [`crate::analysis::DEFAULT_FLOOR_FRACTION`] of that state's maximum.
    pub fn peak(&self, intensity: f64) -> Result<(f64, f64, f64)> {
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(RelayError::invalid("laser.relative_intensity", "must be >= 0"));
        }
        let m = self.cells.len();
        let mut sum = vec![0.0; m];
        let mut defined = vec![true; m];
        for (good, total) in &self.states {
            let t: Vec<f64> = (0..m).map(|k| total.at(k, intensity)).collect();
            let floor = DEFAULT_FLOOR_FRACTION * t.iter().copied().fold(0.0, f64::max);
            for k in 0..m {
                if t[k] < floor || t[k] <= 0.0 {
                    defined[k] = false;
                } else {
                    sum[k] += (good.at(k, intensity) / t[k]).clamp(0.0, 1.0);
                }
            }
        }
        let mut best: Option<(f64, f64, f64)> = None;
        for k in (0..m).filter(|&k| defined[k]) {
            let f = sum[k] / STATES.len() as f64;
            if best.map_or(true, |b| f > b.2) {
                best = Some((self.cells[k].0, self.cells[k].1, f));
            }
        }
        best.ok_or_else(|| RelayError::invalid("fidelity", "undefined everywhere near the origin"))
    }

    pub fn peak_fidelity(&self, intensity: f64) -> Result<f64> {
        Ok(self.peak(intensity)?.2)
    }
}

/// Standalone evaluation with the default strategies.
pub fn peak_fidelity_at(
    source: Arc<SourceModel>,
    base: &LaserModel,
    width_ps: f64,
    delay_ps: f64,
    intensity: f64,
    cfg: &EngineConfig,
    window: &Window,
) -> Result<f64> {
    FidelityProbe::new(source, base, cfg, window, None, &Strategies::default())?
        .peak_fidelity_at(width_ps, delay_ps, intensity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub width_ps: f64,
    pub delay_ps: f64,
    pub intensity: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub widths_ps: Vec<f64>,
    pub delays_ps: Vec<f64>,
    /// Row-major, one row per width.
    pub fidelity: Vec<f64>,
    pub intensity: Vec<f64>,
    pub optimum: SweepPoint,
}

impl SweepResult {
    pub fn point(&self, w: usize, d: usize) -> SweepPoint {
        let k = w * self.delays_ps.len() + d;
        SweepPoint {
            width_ps: self.widths_ps[w],
            delay_ps: self.delays_ps[d],
            intensity: self.intensity[k],
            fidelity: self.fidelity[k],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = SweepPoint> + '_ {
        (0..self.widths_ps.len())
            .flat_map(move |w| (0..self.delays_ps.len()).map(move |d| self.point(w, d)))
    }

    /// Points whose fidelity is within `fraction` of the global maximum.
    pub fn plateau(&self, fraction: f64) -> Vec<SweepPoint> {
        let cut = self.optimum.fidelity * (1.0 - fraction);
        self.points().filter(|p| p.fidelity >= cut).collect()
    }

    /// `(width_min, width_max, delay_min, delay_max)` of the plateau.
    pub fn plateau_box(&self, fraction: f64) -> (f64, f64, f64, f64) {
        self.plateau(fraction).iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |b, p| (b.0.min(p.width_ps), b.1.max(p.width_ps), b.2.min(p.delay_ps), b.3.max(p.delay_ps)),
        )
    }
}

/// Optimizes the intensity at every grid point, in parallel over points.
/// The optimum keeps the first point in row-major order among equals.
pub fn sweep(spec: &SweepSpec, probe: &FidelityProbe, searches: &SearchRegistry) -> Result<SweepResult> {
    spec.validate()?;
    let search = searches.get(&spec.search)?;
    let widths = spec.width_ps.values();
    let delays = spec.delay_ps.values();
    let grid: Vec<(f64, f64)> = widths
        .iter()
        .flat_map(|&w| delays.iter().map(move |&d| (w, d)))
        .collect();
    let found = grid
        .par_iter()
        .map(|&(w, d)| {
            let point = probe.laser(w, d)?;
            search.maximize(&|r| point.peak_fidelity(r), spec.intensity_cap, spec.intensity_tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    let intensity: Vec<f64> = found.iter().map(|f| f.0).collect();
    let fidelity: Vec<f64> = found.iter().map(|f| f.1).collect();
    let best = (0..grid.len()).fold(0, |b, k| if fidelity[k] > fidelity[b] { k } else { b });
    Ok(SweepResult {
        optimum: SweepPoint {
            width_ps: grid[best].0,
            delay_ps: grid[best].1,
            intensity: intensity[best],
            fidelity: fidelity[best],
        },
        widths_ps: widths,
        delays_ps: delays,
        fidelity,
        intensity,
    })
}
