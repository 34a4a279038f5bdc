//! Time integrals over one period that the correlation terms are built
//! from. Each is a surface over `(tau2, tau3)` with `t1 = t - tau2`,
//! `t2 = t - tau3` and `t = t3`, averaged over `t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::surface::{CorrelationSurface, TauAxis};
use crate::grid::{interp_linear_lag, interp_periodic, Correlator};
use crate::optics::{SourceModel, TemporalProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    /// `<I_L(t1) k(t2, tau3)>`: laser at D1, B and X from one cascade.
    LaserCascade,
    /// Two-path overlap `<sqrt(...)>` times envelope and `cos(theta0)`.
    InterferenceCos,
    /// As above with `sin(theta0)`.
    InterferenceSin,
    /// `<I_L(t1) I_B(t2) I_X(t3)>`.
    LaserBX,
    /// B and X from distinct cascades of one cycle, laser at D1.
    LaserBXSameCycle,
    /// `<I_L(t1) I_L(t2) I_X(t3)>`.
    LaserLaserX,
    /// X from the cascade of the B at D1, other B from another cascade.
    BiexcitonCascade,
    /// B, B and X from three distinct cascades.
    BiexcitonUncorrelated,
    /// Chain-substitution estimate of the full two-biexciton correlation.
    BiexcitonChain,
}

impl Component {
    pub fn needs_laser(self) -> bool {
        !matches!(
            self,
            Component::BiexcitonCascade
                | Component::BiexcitonUncorrelated
                | Component::BiexcitonChain
        )
    }
}

/// Laser quantities the laser-dependent components need.
#[derive(Debug, Clone)]
pub struct LaserInputs {
    pub profile: TemporalProfile,
    /// `omega_B - omega_L` in rad/ps.
    pub detuning_rate: f64,
    pub coherence_ps: f64,
}

pub(crate) struct Builder<'a> {
    pub source: &'a SourceModel,
    pub axis: TauAxis,
    corr: Correlator,
    spec_b: Vec<rustfft::num_complex::Complex64>,
    padded_b: Vec<rustfft::num_complex::Complex64>,
}

type Line<'b> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'b>;

impl<'a> Builder<'a> {
    pub fn new(source: &'a SourceModel, axis: TauAxis) -> Self {
        let corr = Correlator::new(source.grid().len);
        let spec_b = corr.spectrum(source.profile_b.samples());
        let padded_b = corr.padded_spectrum(source.profile_b.samples());
        Self {
            source,
            axis,
            corr,
            spec_b,
            padded_b,
        }
    }

    fn n(&self) -> usize {
        self.source.grid().len
    }

    fn dt(&self) -> f64 {
        self.source.grid().dt
    }

    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let g = self.source.grid();
        (0..g.len).map(move |k| g.time(k))
    }

    /// Builds a surface one line at a time. With `by_row` the fixed value is
    /// `tau2` and the line is evaluated at each `tau3`; otherwise the reverse.
    fn lines<'b>(&self, by_row: bool, f: impl Fn(f64) -> Option<Line<'b>> + Sync) -> CorrelationSurface {
        let taus = self.axis.taus();
        let n = taus.len();
        let rows: Vec<Vec<f64>> = taus
            .par_iter()
            .map(|&fixed| match f(fixed) {
                Some(line) => taus.iter().map(|&other| line(other)).collect(),
                None => vec![0.0; n],
            })
            .collect();
        let s = CorrelationSurface::from_values(self.axis, rows.concat())
            .expect("line count matches the axis");
        if by_row {
            s
        } else {
            s.transposed()
        }
    }

    fn periodic_line<'b>(&self, r: Vec<f64>, offset: f64, sign: f64) -> Line<'b> {
        // value at other = r(offset + sign * other) / n
        let dt = self.dt();
        let inv_n = 1.0 / self.n() as f64;
        Box::new(move |other| interp_periodic(&r, dt, offset + sign * other) * inv_n)
    }

    /// `<I_L(t1) k(t2, tau3)>`, built per `tau3` column.
    pub fn laser_cascade(&self, laser: &LaserInputs) -> CorrelationSurface {
        let spec_l = self.corr.spectrum(laser.profile.samples());
        let (lo, hi) = self.source.cascade.delay_range();
        self.lines(false, |tau3| {
            if tau3 < lo || tau3 > hi {
                return None;
            }
            let col = self.source.cascade.column_at(tau3);
            // r[s] = sum_u I_L(u + s) k(u, tau3), s = tau3 - tau2
            let r = self.corr.circular_with(&spec_l, &col);
            Some(self.periodic_line(r, tau3, -1.0))
        })
    }

    /// `sqrt(I_L(t - tau) k(t - tau, tau))` for every `tau` with a cascade.
    fn overlap_amplitudes(&self, laser: &LaserInputs) -> Vec<Option<Vec<f64>>> {
        let (lo, hi) = self.source.cascade.delay_range();
        let k = &self.source.cascade;
        self.axis
            .taus()
            .par_iter()
            .map(|&tau| {
                if tau < lo || tau > hi {
                    return None;
                }
                Some(
                    self.times()
                        .map(|t| (laser.profile.at(t - tau) * k.eval(t - tau, tau)).max(0.0).sqrt())
                        .collect(),
                )
            })
            .collect()
    }

    /// Two-path interference overlap with its envelope and phase, split into
    /// `cos(theta0)` and `sin(theta0)` parts so the analyzer and input phases
    /// enter only through weights.
    pub fn interference(&self, laser: &LaserInputs) -> (CorrelationSurface, CorrelationSurface) {
        let amps = self.overlap_amplitudes(laser);
        let taus = self.axis.taus();
        let n = taus.len();
        let inv_n = 1.0 / self.n() as f64;
        let rate_l = 1.0 / laser.coherence_ps + 1.0 / self.source.b_coherence_ps;
        let s = self.source.s;
        let dw = laser.detuning_rate;
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut c = vec![0.0; n];
                let mut sn = vec![0.0; n];
                if let Some(ai) = &amps[i] {
                    for j in 0..n {
                        if let Some(aj) = &amps[j] {
                            let q: f64 = ai.iter().zip(aj).map(|(x, y)| x * y).sum::<f64>() * inv_n;
                            let (t2, t3) = (taus[i], taus[j]);
                            let tau1 = t2 - t3;
                            let env = (-tau1.abs() * rate_l).exp();
                            let theta = dw * tau1 - s * (t2 + t3);
                            c[j] = q * env * theta.cos();
                            sn[j] = q * env * theta.sin();
                        }
                    }
                }
                (c, sn)
            })
            .collect();
        let (c, sn): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        (
            CorrelationSurface::from_values(self.axis, c.concat()).expect("grid"),
            CorrelationSurface::from_values(self.axis, sn.concat()).expect("grid"),
        )
    }

    /// `<P(t1) Q(t2) I_X(t3)>` for two periodic profiles.
    fn uncorrelated_triple(&self, first: &TemporalProfile, second: &TemporalProfile) -> CorrelationSurface {
        let x = &self.source.profile_x;
        let first = first.samples().to_vec();
        self.lines(false, |tau3| {
            let v: Vec<f64> = self
                .times()
                .map(|t| second.at(t - tau3) * x.at(t))
                .collect();
            // r[s] = sum_t v(t + s) P(t), s = tau2
            let r = self.corr.circular(&v, &first);
            Some(self.periodic_line(r, 0.0, 1.0))
        })
    }

    pub fn laser_bx(&self, laser: &LaserInputs) -> CorrelationSurface {
        self.uncorrelated_triple(&laser.profile, &self.source.profile_b)
    }

    pub fn laser_laser_x(&self, laser: &LaserInputs) -> CorrelationSurface {
        self.uncorrelated_triple(&laser.profile, &laser.profile)
    }

    /// `<I_L(t1) I_B(u) x_local(u + tau3)>` with `u` the B time in its cycle.
    pub fn laser_bx_same_cycle(&self, laser: &LaserInputs) -> CorrelationSurface {
        let spec_l = self.corr.spectrum(laser.profile.samples());
        let b = self.source.profile_b.samples();
        self.lines(false, |tau3| {
            let v: Vec<f64> = self
                .times()
                .zip(b)
                .map(|(u, &bv)| bv * self.source.x_local_at(u + tau3))
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                return None;
            }
            let r = self.corr.circular_with(&spec_l, &v);
            Some(self.periodic_line(r, tau3, -1.0))
        })
    }

    /// Row `tau2` of a correlation of `v(u)` (u = B time at D1 in its cycle)
    /// against the B profile at `u + delta`, `delta = tau2 - tau3`: the
    /// periodic part weighted by `w_per` and the same-cycle part by `w_loc`.
    fn b_partner_line<'b>(&self, v: &[f64], tau2: f64, w_per: f64, w_loc: f64) -> Line<'b> {
        let per = if w_per != 0.0 {
            self.corr.circular_with(&self.spec_b, v)
        } else {
            Vec::new()
        };
        let loc = if w_loc != 0.0 {
            self.corr.linear_with(&self.padded_b, v)
        } else {
            Vec::new()
        };
        let (n, dt) = (self.n(), self.dt());
        let inv_n = 1.0 / n as f64;
        Box::new(move |tau3| {
            let delta = tau2 - tau3;
            let mut acc = 0.0;
            if w_per != 0.0 {
                acc += w_per * interp_periodic(&per, dt, delta);
            }
            if w_loc != 0.0 {
                acc += w_loc * interp_linear_lag(&loc, n, dt, delta);
            }
            acc * inv_n
        })
    }

    /// Pair from the cascade whose B hit D1, plus a B from another cascade
    /// at D2, including the same-cycle correction.
    pub fn biexciton_cascade(&self) -> CorrelationSurface {
        let (lo, hi) = self.source.cascade.delay_range();
        let p = self.source.pair_scale();
        let cq = self.source.same_cycle_coeff();
        self.lines(true, |tau2| {
            if tau2 < lo || tau2 > hi {
                return None;
            }
            let v: Vec<f64> = self
                .source
                .cascade
                .column_at(tau2)
                .into_iter()
                .map(|x| p * x)
                .collect();
            Some(self.b_partner_line(&v, tau2, 1.0, cq))
        })
    }

    /// Two B photons and an X from three distinct cascades, by cluster
    /// expansion over which of them share a cycle.
    pub fn biexciton_uncorrelated(&self) -> CorrelationSurface {
        let src = self.source;
        let cq = src.same_cycle_coeff();
        let k3 = src.triple_coeff();
        let b = src.profile_b.samples();
        let mut total = self.uncorrelated_triple(&src.profile_b, &src.profile_b);
        // B1 and B2 in one cycle, X anywhere
        let bb = self.lines(true, |tau2| {
            let v: Vec<f64> = self
                .times()
                .zip(b)
                .map(|(u, &bv)| bv * src.profile_x.at(u + tau2))
                .collect();
            Some(self.b_partner_line(&v, tau2, 0.0, 1.0))
        });
        // B1 and X in one cycle: periodic partner gives the pair term,
        // same-cycle partner the three-in-one-cycle term
        let bx = self.lines(true, |tau2| {
            let v: Vec<f64> = self
                .times()
                .zip(b)
                .map(|(u, &bv)| bv * src.x_local_at(u + tau2))
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                return None;
            }
            Some(self.b_partner_line(&v, tau2, 1.0, 0.0))
        });
        let triple = self.lines(true, |tau2| {
            let v: Vec<f64> = self
                .times()
                .zip(b)
                .map(|(u, &bv)| bv * src.x_local_at(u + tau2))
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                return None;
            }
            Some(self.b_partner_line(&v, tau2, 0.0, 1.0))
        });
        total.add_scaled(&bb, cq, false);
        total.add_scaled(&bx, cq, false);
        total.add_scaled(&bx, cq, true);
        total.add_scaled(&triple, k3, false);
        total
    }
}
