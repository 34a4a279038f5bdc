//! Estimators for the two-biexciton background, where both BSM detectors
//! fire on B photons from different cascades.

use std::sync::Arc;

use rayon::prelude::*;

use super::components::Component;
use super::surface::{CorrelationSurface, TauAxis};
use super::terms::{WeightContext, Weighted};
use crate::error::{RelayError, Result};
use crate::optics::{PairKernel, SourceModel};

pub trait BbxEstimator: Send + Sync {
    fn name(&self) -> &str;
    fn components(&self) -> Vec<Component>;
    fn weights(&self, ctx: &WeightContext) -> Vec<Weighted>;
}

/// Exact cluster expansion of the cascade model. The X either belongs to
/// the cascade of one of the two B photons, which ties its polarization to
/// that B for entangled cascades, or to a third cascade.
pub struct CascadeBbx;

impl BbxEstimator for CascadeBbx {
    fn name(&self) -> &str {
        "cascade"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::BiexcitonCascade, Component::BiexcitonUncorrelated]
    }
    fn weights(&self, c: &WeightContext) -> Vec<Weighted> {
        let f = c.entangled_fraction;
        let c2x = c.analyzer.a.cos().powi(2);
        let s2x = c.analyzer.a.sin().powi(2);
        vec![
            // X partner of the H photon at D1
            Weighted::plain(Component::BiexcitonCascade, 0.25 * c2x * f + 0.125 * (1.0 - f)),
            // X partner of the V photon at D2
            Weighted::transposed(Component::BiexcitonCascade, 0.25 * s2x * f + 0.125 * (1.0 - f)),
            Weighted::plain(Component::BiexcitonUncorrelated, 0.125),
        ]
    }
}

/// Chain substitution: the three-photon correlation approximated by the
/// product of the two-photon correlations of consecutive detections,
/// polarization-averaged.
pub struct ChainBbx;

impl BbxEstimator for ChainBbx {
    fn name(&self) -> &str {
        "chain"
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::BiexcitonChain]
    }
    fn weights(&self, _c: &WeightContext) -> Vec<Weighted> {
        vec![Weighted::plain(Component::BiexcitonChain, 0.125)]
    }
}

pub struct BbxRegistry {
    estimators: Vec<Arc<dyn BbxEstimator>>,
}

impl BbxRegistry {
    pub fn empty() -> Self {
        Self { estimators: Vec::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(CascadeBbx));
        r.register(Arc::new(ChainBbx));
        r
    }

    pub fn register(&mut self, estimator: Arc<dyn BbxEstimator>) {
        self.estimators.retain(|e| e.name() != estimator.name());
        self.estimators.push(estimator);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn BbxEstimator>> {
        self.estimators
            .iter()
            .find(|e| e.name() == name)
            .cloned()
            .ok_or_else(|| RelayError::UnknownStrategy {
                kind: "two-biexciton estimator",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.estimators.iter().map(|e| e.name().to_string()).collect()
    }
}

impl Default for BbxRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

/// Chain estimate for two B photons at `t_a`, `t_b` and an X at `t_c`.
///
/// The three times are put in detection order and the result is
/// `g2(first, second) * g2(second, third) / I(second)`, using `g2_bb`
/// between two B photons and `g2_bx` (evaluated as `(t_B, t_X)`) between a
/// B and the X.
pub fn g3_bbx_chain(g2_bb: &PairKernel, g2_bx: &PairKernel, t_a: f64, t_b: f64, t_c: f64) -> f64 {
    #[derive(Clone, Copy)]
    enum Kind {
        B,
        X,
    }
    let mut ev = [(t_a, Kind::B), (t_b, Kind::B), (t_c, Kind::X)];
    ev.sort_by(|x, y| x.0.total_cmp(&y.0));
    let pair = |(t1, k1): (f64, Kind), (t2, k2): (f64, Kind)| match (k1, k2) {
        (Kind::B, Kind::B) => g2_bb.eval(t1, t2),
        (Kind::B, Kind::X) => g2_bx.eval(t1, t2),
        (Kind::X, Kind::B) => g2_bx.eval(t2, t1),
        (Kind::X, Kind::X) => unreachable!("one X photon"),
    };
    let mid = match ev[1].1 {
        Kind::B => g2_bb.first.at(ev[1].0),
        Kind::X => g2_bx.second.at(ev[1].0),
    };
    if mid <= 0.0 {
        return 0.0;
    }
    pair(ev[0], ev[1]) * pair(ev[1], ev[2]) / mid
}

/// Time-averaged chain estimate over `(tau2, tau3)`. Evaluated pointwise,
/// so much slower than the cascade estimator.
pub fn chain_surface(source: &SourceModel, axis: TauAxis) -> CorrelationSurface {
    let bb = source.g2_bb();
    let bx = source.g2_bx_total();
    let g = source.grid();
    let taus = axis.taus();
    let rows: Vec<Vec<f64>> = taus
        .par_iter()
        .map(|&t2| {
            taus.iter()
                .map(|&t3| {
                    (0..g.len)
                        .map(|k| {
                            let t = g.time(k);
                            g3_bbx_chain(&bb, &bx, t - t2, t - t3, t)
                        })
                        .sum::<f64>()
                        / g.len as f64
                })
                .collect()
        })
        .collect();
    CorrelationSurface::from_values(axis, rows.concat()).expect("grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::optics::{DelayGrid, TemporalProfile};

    fn flat(correlated: f64) -> PairKernel {
        let g = PeriodicGrid::new(1000.0, 10.0).unwrap();
        let p = TemporalProfile::constant(g);
        PairKernel {
            first: p.clone(),
            second: p,
            correlated: DelayGrid::from_fn(g, -1000.0, 201, |_, _| correlated),
            uncorrelated_weight: 1.0,
        }
    }

    #[test]
    fn flat_kernels_chain_to_one() {
        let (bb, bx) = (flat(0.0), flat(0.0));
        for (a, b, c) in [(0.0, 10.0, 20.0), (300.0, 5.0, 120.0), (40.0, 40.0, 7.0)] {
            assert!((g3_bbx_chain(&bb, &bx, a, b, c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antibunched_biexcitons_vanish() {
        // g2_BB = 1 - 1 = 0 at every delay covered by the kernel
        let bb = flat(-1.0);
        let bx = flat(0.0);
        assert_eq!(g3_bbx_chain(&bb, &bx, 100.0, 100.0, 150.0), 0.0);
        assert_eq!(g3_bbx_chain(&bb, &bx, 100.0, 100.0, 20.0), 0.0);
    }

    #[test]
    fn registry_selects_by_name() {
        let r = BbxRegistry::with_defaults();
        assert_eq!(r.get("cascade").unwrap().name(), "cascade");
        assert_eq!(r.get("chain").unwrap().name(), "chain");
        let err = r.get("kirkwood").err().unwrap().to_string();
        assert!(err.contains("cascade, chain"), "{err}");
    }
}
