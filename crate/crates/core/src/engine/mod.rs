//! Third-order correlation `g3(tau2, tau3)` of the relay: two BSM detectors
//! (D1 for H, D2 for V) and the analyzer detector D3 on the X photon.

mod bbx;
mod components;
mod jitter;
mod surface;
mod terms;
mod window;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bbx::{chain_surface, g3_bbx_chain, BbxEstimator, BbxRegistry, CascadeBbx, ChainBbx};
pub use components::{Component, LaserInputs};
pub use jitter::{apply_detector_sigma, apply_jitter, blur_series, detector_sigma};
pub use surface::{CorrelationSurface, Normalization, SurfaceMeta, TauAxis};
pub use terms::{standard_terms, CorrelationTerm, WeightContext, Weighted};
pub use window::{integrate_window, integrate_window_sheared, Window, WindowShape};

use crate::error::{RelayError, Result};
use crate::grid::{PeriodicGrid, MAX_STEP_PS};
use crate::optics::{LaserModel, PolarizationState, PulseShapeRegistry, SourceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Quadrature step; must match the source grid.
    pub dt_ps: f64,
    pub tau_step_ps: f64,
    /// Half extent of the delay axes; two periods when unset.
    pub tau_range_ps: Option<f64>,
    /// Detector-pair jitter FWHM.
    pub jitter_fwhm_ps: f64,
    pub normalization: Normalization,
    /// Weight of the two-laser-photon term (Poissonian pair statistics).
    pub two_laser_weight: f64,
    pub bbx_strategy: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            dt_ps: 8.0,
            tau_step_ps: 16.0,
            tau_range_ps: None,
            jitter_fwhm_ps: 58.4,
            normalization: Normalization::UncorrelatedLimit,
            two_laser_weight: 0.5,
            bbx_strategy: "cascade".into(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self, source: &SourceModel) -> Result<TauAxis> {
        if !(self.dt_ps > 0.0 && self.dt_ps <= MAX_STEP_PS) {
            return Err(RelayError::invalid("engine.dt_ps", "must be in (0, 16]"));
        }
        let quad = PeriodicGrid::new(source.period(), self.dt_ps)?;
        if !quad.same_as(&source.grid()) {
            return Err(RelayError::invalid(
                "engine.dt_ps",
                format!(
                    "quadrature grid of {} points does not match the {}-point source grid",
                    quad.len,
                    source.grid().len
                ),
            ));
        }
        if !(self.tau_step_ps > 0.0 && self.tau_step_ps <= MAX_STEP_PS) {
            return Err(RelayError::invalid("engine.tau_step_ps", "must be in (0, 16]"));
        }
        if !(self.jitter_fwhm_ps.is_finite() && self.jitter_fwhm_ps >= 0.0) {
            return Err(RelayError::invalid("engine.jitter_fwhm_ps", "must be >= 0"));
        }
        if !(self.two_laser_weight.is_finite() && self.two_laser_weight >= 0.0) {
            return Err(RelayError::invalid("engine.two_laser_weight", "must be >= 0"));
        }
        let range = self.tau_range_ps.unwrap_or(2.0 * source.period());
        TauAxis::new(range, self.tau_step_ps)
    }
}

/// Named strategy registries consulted when building an engine.
#[derive(Default)]
pub struct Strategies {
    pub pulses: PulseShapeRegistry,
    pub bbx: BbxRegistry,
}

type ComponentMap = BTreeMap<Component, Arc<CorrelationSurface>>;

/// Laser-independent part of an engine, reusable across laser settings.
#[derive(Clone)]
pub struct SourcePart {
    source: Arc<SourceModel>,
    cfg: EngineConfig,
    axis: TauAxis,
    terms: Vec<Arc<dyn CorrelationTerm>>,
    components: ComponentMap,
}

impl SourcePart {
    pub fn new(source: Arc<SourceModel>, cfg: &EngineConfig, strategies: &Strategies) -> Result<Self> {
        let axis = cfg.validate(&source)?;
        let terms = standard_terms(strategies.bbx.get(&cfg.bbx_strategy)?);
        let builder = components::Builder::new(&source, axis);
        let mut components = ComponentMap::new();
        for c in needed(&terms).into_iter().filter(|c| !c.needs_laser()) {
            let raw = match c {
                Component::BiexcitonCascade => builder.biexciton_cascade(),
                Component::BiexcitonUncorrelated => builder.biexciton_uncorrelated(),
                Component::BiexcitonChain => chain_surface(&source, axis),
                _ => unreachable!(),
            };
            components.insert(c, Arc::new(apply_jitter(&raw, cfg.jitter_fwhm_ps)));
        }
        Ok(Self {
            source,
            cfg: cfg.clone(),
            axis,
            terms,
            components,
        })
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }

    pub fn axis(&self) -> TauAxis {
        self.axis
    }

    /// Adds the laser-dependent components.
    pub fn with_laser(&self, laser: &LaserModel, pulses: &PulseShapeRegistry) -> Result<Engine> {
        laser.validate()?;
        let inputs = LaserInputs {
            profile: laser.profile(&self.source, pulses)?,
            detuning_rate: laser.detuning_rate(),
            coherence_ps: laser.coherence_ps,
        };
        self.with_laser_inputs(&inputs, laser.relative_intensity)
    }

    pub fn with_laser_inputs(&self, laser: &LaserInputs, relative_intensity: f64) -> Result<Engine> {
        let builder = components::Builder::new(&self.source, self.axis);
        let mut components = self.components.clone();
        let need = needed(&self.terms);
        let jit = |s: CorrelationSurface| Arc::new(apply_jitter(&s, self.cfg.jitter_fwhm_ps));
        if need.contains(&Component::InterferenceCos) || need.contains(&Component::InterferenceSin) {
            let (c, s) = builder.interference(laser);
            components.insert(Component::InterferenceCos, jit(c));
            components.insert(Component::InterferenceSin, jit(s));
        }
        for c in need.into_iter().filter(|c| c.needs_laser()) {
            let raw = match c {
                Component::LaserCascade => builder.laser_cascade(laser),
                Component::LaserBX => builder.laser_bx(laser),
                Component::LaserBXSameCycle => builder.laser_bx_same_cycle(laser),
                Component::LaserLaserX => builder.laser_laser_x(laser),
                Component::InterferenceCos | Component::InterferenceSin => continue,
                _ => unreachable!(),
            };
            components.insert(c, jit(raw));
        }
        Ok(Engine {
            part: self.clone(),
            components,
            relative_intensity,
        })
    }
}

fn needed(terms: &[Arc<dyn CorrelationTerm>]) -> Vec<Component> {
    let mut v: Vec<Component> = terms.iter().flat_map(|t| t.components()).collect();
    v.sort();
    v.dedup();
    v
}

/// Jittered components for one source and laser. Surfaces for any input,
/// analyzer and relative intensity are weighted sums of them.
#[derive(Clone)]
pub struct Engine {
    part: SourcePart,
    components: ComponentMap,
    relative_intensity: f64,
}

impl Engine {
    pub fn new(
        source: Arc<SourceModel>,
        laser: &LaserModel,
        cfg: &EngineConfig,
        strategies: &Strategies,
    ) -> Result<Self> {
        SourcePart::new(source, cfg, strategies)?.with_laser(laser, &strategies.pulses)
    }

    pub fn axis(&self) -> TauAxis {
        self.part.axis
    }

    pub fn source(&self) -> &SourceModel {
        &self.part.source
    }

    pub fn config(&self) -> &EngineConfig {
        &self.part.cfg
    }

    pub fn relative_intensity(&self) -> f64 {
        self.relative_intensity
    }

    /// Same components at another `eta_L / eta_B`.
    pub fn with_intensity(&self, relative_intensity: f64) -> Self {
        Self {
            relative_intensity,
            ..self.clone()
        }
    }

    /// Applies the coincidence window to every component once.
    pub fn windowed(&self, window: &Window) -> Result<Self> {
        let mut components = ComponentMap::new();
        for (k, v) in &self.components {
            components.insert(*k, Arc::new(window.apply(v)?));
        }
        Ok(Self {
            components,
            ..self.clone()
        })
    }

    pub fn component(&self, c: Component) -> Option<&CorrelationSurface> {
        self.components.get(&c).map(|a| a.as_ref())
    }

    /// Factor from internal units to the configured normalization.
    pub fn normalization_factor(&self, input: PolarizationState) -> f64 {
        let r = self.relative_intensity;
        match self.part.cfg.normalization {
            Normalization::Raw => {
                if r > 0.0 {
                    1.0 / r
                } else {
                    1.0
                }
            }
            Normalization::UncorrelatedLimit => {
                // Plateau of the summed terms: a product of singles rates,
                // corrected when the two-laser weight departs from 1/2.
                let (c2, s2) = (input.a.cos().powi(2), input.a.sin().powi(2));
                let d1 = r * c2 + 0.5;
                let d2 = r * s2 + 0.5;
                let excess = r * r * c2 * s2 * (0.5 - self.part.cfg.two_laser_weight);
                1.0 / (0.5 * d1 * d2 - excess)
            }
        }
    }

    /// The seven terms in summation order.
    pub fn term_surfaces(
        &self,
        input: PolarizationState,
        analyzer: PolarizationState,
    ) -> Vec<CorrelationSurface> {
        let ctx = WeightContext::new(
            &self.part.source,
            input,
            analyzer,
            self.relative_intensity,
            self.part.cfg.two_laser_weight,
        );
        let norm = self.normalization_factor(input);
        self.part
            .terms
            .iter()
            .map(|t| {
                let mut s = CorrelationSurface::zeros(self.axis());
                for w in t.weights(&ctx) {
                    let comp = self
                        .components
                        .get(&w.component)
                        .expect("component computed for every registered term");
                    s.add_scaled(comp, w.weight * norm, w.transposed);
                }
                s.meta = self.meta(input, analyzer, t.name());
                s
            })
            .collect()
    }

    pub fn surface(&self, input: PolarizationState, analyzer: PolarizationState) -> CorrelationSurface {
        let terms = self.term_surfaces(input, analyzer);
        let mut total = CorrelationSurface::zeros(self.axis());
        for t in &terms {
            total.add_scaled(t, 1.0, false);
        }
        total.meta = self.meta(input, analyzer, "g3");
        total
    }

    fn meta(&self, input: PolarizationState, analyzer: PolarizationState, label: &str) -> SurfaceMeta {
        SurfaceMeta {
            label: label.to_string(),
            input: Some(input),
            analyzer: Some(analyzer),
            normalization: Some(self.part.cfg.normalization),
        }
    }
}

/// Full jittered `g3(tau2, tau3)` for one input state and analyzer setting.
pub fn g3_surface(
    source: &SourceModel,
    laser: &LaserModel,
    input: PolarizationState,
    analyzer: PolarizationState,
    cfg: &EngineConfig,
) -> Result<CorrelationSurface> {
    let engine = Engine::new(Arc::new(source.clone()), laser, cfg, &Strategies::default())?;
    Ok(engine.surface(input, analyzer))
}

/// The seven jittered terms whose sum is [`g3_surface`].
pub fn g3_term_breakdown(
    source: &SourceModel,
    laser: &LaserModel,
    input: PolarizationState,
    analyzer: PolarizationState,
    cfg: &EngineConfig,
) -> Result<Vec<CorrelationSurface>> {
    let engine = Engine::new(Arc::new(source.clone()), laser, cfg, &Strategies::default())?;
    Ok(engine.term_surfaces(input, analyzer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::SourceParams;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn source() -> Arc<SourceModel> {
        Arc::new(
            SourceModel::build(&SourceParams {
                dt_ps: 16.0,
                ..SourceParams::default()
            })
            .unwrap(),
        )
    }

    fn cfg(source: &SourceModel, range: f64) -> EngineConfig {
        EngineConfig {
            dt_ps: 16.0,
            tau_step_ps: source.grid().dt,
            tau_range_ps: Some(range),
            ..EngineConfig::default()
        }
    }

    fn engine(laser: &LaserModel, range: f64) -> Engine {
        let s = source();
        let c = cfg(&s, range);
        Engine::new(s, laser, &c, &Strategies::default()).unwrap()
    }

    fn states() -> Vec<PolarizationState> {
        vec![
            PolarizationState::H,
            PolarizationState::V,
            PolarizationState::D,
            PolarizationState::A,
            PolarizationState::new(0.3, 1.1).unwrap(),
        ]
    }

    #[test]
    fn terms_add_up_and_total_is_nonnegative() {
        let e = engine(&LaserModel::default(), 1500.0);
        for input in states() {
            for analyzer in states() {
                let terms = e.term_surfaces(input, analyzer);
                let total = e.surface(input, analyzer);
                assert_eq!(terms.len(), 7);
                let scale = total.max();
                let mut sum = CorrelationSurface::zeros(e.axis());
                for t in &terms {
                    sum.add_scaled(t, 1.0, false);
                }
                for (a, b) in sum.values().iter().zip(total.values()) {
                    assert!((a - b).abs() <= 1e-9 * scale);
                }
                assert!(total.min() >= -1e-9 * scale);
                for (k, t) in terms.iter().enumerate() {
                    if k != 2 {
                        assert!(t.min() >= -1e-12 * scale, "term {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn prefactors_select_the_surviving_terms() {
        let e = engine(&LaserModel::default(), 800.0);
        let terms = e.term_surfaces(PolarizationState::H, PolarizationState::H);
        let nonzero: Vec<usize> = (0..7).filter(|&k| terms[k].max() > 0.0).collect();
        assert_eq!(nonzero, vec![3, 6]);

        let dark = engine(&LaserModel { relative_intensity: 0.0, ..LaserModel::default() }, 800.0);
        let terms = dark.term_surfaces(PolarizationState::D, PolarizationState::A);
        let nonzero: Vec<usize> = (0..7).filter(|&k| terms[k].max().abs() > 0.0).collect();
        assert_eq!(nonzero, vec![6]);
    }

    #[test]
    fn periodic_where_the_x_is_unpaired() {
        let s = source();
        let p = s.period();
        let c = cfg(&s, 3.0 * p);
        let e = Engine::new(s, &LaserModel::default(), &c, &Strategies::default()).unwrap();
        let g = e.surface(PolarizationState::D, PolarizationState::D);
        let ax = e.axis();
        // beyond two periods only a ~1e-5 tail of X remains from the
        // cascades of t1 or t2
        for (a, b) in [(-2000.0, -600.0), (-400.0, -1200.0), (-1500.0, -1500.0), (-300.0, -2300.0)] {
            let i = |t: f64| ax.index_of(t).unwrap();
            let (x, y) = (g.get(i(2.0 * p + a), i(2.0 * p + b)), g.get(i(3.0 * p + a), i(3.0 * p + b)));
            assert!((x - y).abs() < 1e-4 * x.abs().max(1e-3), "{a} {b}: {x} {y}");
        }
    }

    #[test]
    fn swapping_h_and_v_transposes_the_surface() {
        let laser = LaserModel { detuning_uev: 0.0, ..LaserModel::default() };
        let e = engine(&laser, 1200.0);
        for (a, x) in [(0.2, 0.7), (FRAC_PI_4, FRAC_PI_4), (0.0, 1.3)] {
            let g = e.surface(
                PolarizationState::new(a, 0.4).unwrap(),
                PolarizationState::new(x, -0.4).unwrap(),
            );
            let h = e.surface(
                PolarizationState::new(FRAC_PI_2 - a, 0.4).unwrap(),
                PolarizationState::new(FRAC_PI_2 - x, -0.4).unwrap(),
            );
            let ht = h.transposed();
            let scale = g.max();
            for (u, v) in g.values().iter().zip(ht.values()) {
                assert!((u - v).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn interference_changes_sign_after_half_a_precession() {
        let e = engine(&LaserModel::default(), 1200.0);
        let s = e.source().s;
        let terms = e.term_surfaces(PolarizationState::D, PolarizationState::D);
        let ax = e.axis();
        let at = |sum: f64| {
            let i = ax.index_of(sum / 2.0).unwrap();
            terms[2].get(i, i)
        };
        assert!(at(2.0 * ax.step) > 0.0);
        assert!(at(PI / s) < 0.0, "{}", at(PI / s));
    }

    #[test]
    fn far_from_the_origin_the_mean_is_one() {
        let s = source();
        let p = s.period();
        let c = cfg(&s, 2.0 * p);
        let e = Engine::new(s, &LaserModel::default(), &c, &Strategies::default()).unwrap();
        let ax = e.axis();
        for input in [PolarizationState::H, PolarizationState::D] {
            let g = e.surface(input, PolarizationState::V);
            // one period box with all three photons in different cycles
            let lo2 = ax.index_of(0.5 * p).unwrap();
            let lo3 = ax.index_of(-1.5 * p).unwrap();
            let cells = (p / ax.step).round() as usize;
            let mut sum = 0.0;
            for i in lo2..lo2 + cells {
                for j in lo3..lo3 + cells {
                    sum += g.get(i, j);
                }
            }
            let mean = sum / (cells * cells) as f64;
            assert!((mean - 1.0).abs() < 0.05, "{mean}");
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let s = source();
        let bad = EngineConfig { dt_ps: 8.0, ..cfg(&s, 500.0) };
        assert!(matches!(
            Engine::new(s.clone(), &LaserModel::default(), &bad, &Strategies::default()),
            Err(RelayError::InvalidParameter { name: "engine.dt_ps", .. })
        ));
        let unknown = EngineConfig { bbx_strategy: "magic".into(), ..cfg(&s, 500.0) };
        assert!(Engine::new(s, &LaserModel::default(), &unknown, &Strategies::default()).is_err());
    }
}
