//! The seven contributions to the three-photon correlation, each a weighted
//! sum of [`Component`] surfaces. Weights are in units of
//! `eta_B^2 eta_X`, so `r = eta_L / eta_B` appears once per laser photon.

use std::sync::Arc;

use super::bbx::BbxEstimator;
use super::components::Component;
use crate::optics::{PolarizationState, SourceModel};

/// Everything a term weight may depend on.
#[derive(Debug, Clone, Copy)]
pub struct WeightContext {
    pub input: PolarizationState,
    pub analyzer: PolarizationState,
    /// `eta_L / eta_B`.
    pub r: f64,
    pub entangled_fraction: f64,
    pub pair_scale: f64,
    pub same_cycle_coeff: f64,
    pub two_laser_weight: f64,
}

impl WeightContext {
    pub fn new(
        source: &SourceModel,
        input: PolarizationState,
        analyzer: PolarizationState,
        r: f64,
        two_laser_weight: f64,
    ) -> Self {
        Self {
            input,
            analyzer,
            r,
            entangled_fraction: source.entangled_fraction,
            pair_scale: source.pair_scale(),
            same_cycle_coeff: source.same_cycle_coeff(),
            two_laser_weight,
        }
    }

    fn c2a(&self) -> f64 {
        self.input.a.cos().powi(2)
    }
    fn s2a(&self) -> f64 {
        self.input.a.sin().powi(2)
    }
    fn c2x(&self) -> f64 {
        self.analyzer.a.cos().powi(2)
    }
    fn s2x(&self) -> f64 {
        self.analyzer.a.sin().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weighted {
    pub component: Component,
    pub transposed: bool,
    pub weight: f64,
}

impl Weighted {
    pub fn plain(component: Component, weight: f64) -> Self {
        Self { component, transposed: false, weight }
    }
    pub fn transposed(component: Component, weight: f64) -> Self {
        Self { component, transposed: true, weight }
    }
}

pub trait CorrelationTerm: Send + Sync {
    fn name(&self) -> &str;
    fn components(&self) -> Vec<Component>;
    fn weights(&self, ctx: &WeightContext) -> Vec<Weighted>;
}

/// Laser at D1, entangled B at D2.
pub struct LaserH;
/// Laser at D2, entangled B at D1.
pub struct LaserV;
/// Interference between the two previous paths.
pub struct Interference;
/// Laser at D1, B and X not entangled.
pub struct MixedH;
/// Laser at D2, B and X not entangled.
pub struct MixedV;
/// Two laser photons and an X.
pub struct TwoLaser;
/// Two biexciton photons and an X, estimated by a [`BbxEstimator`].
pub struct TwoBiexciton(pub Arc<dyn BbxEstimator>);

impl CorrelationTerm for LaserH {
    fn name(&self) -> &str {
        "laser-h"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::LaserCascade]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        let w = c.r * 0.5 * c.c2a() * c.s2x() * c.entangled_fraction * c.pair_scale;
        vec![Weighted::plain(Component::LaserCascade, w)]
    }
}

impl CorrelationTerm for LaserV {
    fn name(&self) -> &str {
        "laser-v"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::LaserCascade]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        let w = c.r * 0.5 * c.s2a() * c.c2x() * c.entangled_fraction * c.pair_scale;
        vec![Weighted::transposed(Component::LaserCascade, w)]
    }
}

impl CorrelationTerm for Interference {
    fn name(&self) -> &str {
        "interference"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::InterferenceCos, Component::InterferenceSin]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        let amp = c.r
            * 0.25
            * (2.0 * c.input.a).sin()
            * (2.0 * c.analyzer.a).sin()
            * c.entangled_fraction
            * c.pair_scale;
        let phase = c.analyzer.b + c.input.b;
        vec![
            Weighted::plain(Component::InterferenceCos, amp * phase.cos()),
            Weighted::plain(Component::InterferenceSin, -amp * phase.sin()),
        ]
    }
}

fn mixed(c: &WeightContext, pol: f64, transposed: bool) -> Vec<Weighted> {
    let base = c.r * 0.25 * pol;
    let mk = |comp, w| Weighted { component: comp, transposed, weight: w };
    vec![
        mk(Component::LaserCascade, base * (1.0 - c.entangled_fraction) * c.pair_scale),
        mk(Component::LaserBX, base),
        mk(Component::LaserBXSameCycle, base * c.same_cycle_coeff),
    ]
}

impl CorrelationTerm for MixedH {
    fn name(&self) -> &str {
        "mixed-h"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::LaserCascade, Component::LaserBX, Component::LaserBXSameCycle]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        mixed(c, c.c2a(), false)
    }
}

impl CorrelationTerm for MixedV {
    fn name(&self) -> &str {
        "mixed-v"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::LaserCascade, Component::LaserBX, Component::LaserBXSameCycle]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        mixed(c, c.s2a(), true)
    }
}

impl CorrelationTerm for TwoLaser {
    fn name(&self) -> &str {
        "two-laser"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::LaserLaserX]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        let w = c.r * c.r * c.two_laser_weight * c.c2a() * c.s2a();
        vec![Weighted::plain(Component::LaserLaserX, w)]
    }
}

impl CorrelationTerm for TwoBiexciton {
    fn name(&self) -> &str {
        "two-biexciton"
    }
    fn components(&self) -> Vec<Component> {
        self.0.components()
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        self.0.weights(c)
    }
}

/// The seven terms in summation order.
pub fn standard_terms(bbx: Arc<dyn BbxEstimator>) -> Vec<Arc<dyn CorrelationTerm>> {
    vec![
        Arc::new(LaserH),
        Arc::new(LaserV),
        Arc::new(Interference),
        Arc::new(MixedH),
        Arc::new(MixedV),
        Arc::new(TwoLaser),
        Arc::new(TwoBiexciton(bbx)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::bbx::CascadeBbx;

    fn ctx(input: PolarizationState, analyzer: PolarizationState, r: f64) -> WeightContext {
        WeightContext {
            input,
            analyzer,
            r,
            entangled_fraction: 0.9,
            pair_scale: 4900.0,
            same_cycle_coeff: -0.95,
            two_laser_weight: 0.5,
        }
    }

    fn total_weight(t: &dyn CorrelationTerm, c: &WeightContext) -> f64 {
        t.weights(c).iter().map(|w| w.weight.abs()).sum()
    }

    #[test]
    fn horizontal_input_silences_the_v_paths() {
        let terms = standard_terms(Arc::new(CascadeBbx));
        let c = ctx(PolarizationState::H, PolarizationState::D, 0.85);
        let zero: Vec<&str> = terms
            .iter()
            .filter(|t| total_weight(t.as_ref(), &c) < 1e-15)
            .map(|t| t.name())
            .collect();
        assert_eq!(zero, vec!["laser-v", "interference", "mixed-v", "two-laser"]);
    }

    #[test]
    fn no_laser_leaves_only_biexcitons() {
        let terms = standard_terms(Arc::new(CascadeBbx));
        let c = ctx(PolarizationState::D, PolarizationState::A, 0.0);
        for (k, t) in terms.iter().enumerate() {
            assert_eq!(total_weight(t.as_ref(), &c) > 0.0, k == 6, "{}", t.name());
        }
    }

    #[test]
    fn interference_phase_enters_through_weights() {
        let c = ctx(PolarizationState::D, PolarizationState::new(std::f64::consts::FRAC_PI_4, 0.5).unwrap(), 1.0);
        let w = Interference.weights(&c);
        let amp = 0.25 * 0.9 * 4900.0;
        assert!((w[0].weight - amp * 0.5f64.cos()).abs() < 1e-9);
        assert!((w[1].weight + amp * 0.5f64.sin()).abs() < 1e-9);
    }
}
