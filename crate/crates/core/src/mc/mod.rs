//! Event-level Monte Carlo of the relay: photon emission, the beam-splitter
//! measurement, detector jitter and time tagging.

mod compare;
mod histogram;
mod sampler;

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::detector_sigma;
use crate::error::{ensure_non_negative, ensure_positive, RelayError, Result};
use crate::optics::{LaserModel, PolarizationState, PulseShapeRegistry, SourceModel, TemporalProfile};
use sampler::{DelaySampler, Edges, ProfileSampler};

pub use compare::{compare, scaling_exponent, Comparison};
pub use histogram::{histogram_g2, histogram_g3, plateau_cells, G2Series, G3Histogram};

/// Hardware time-tag resolution.
pub const TAG_RESOLUTION_PS: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Detector {
    /// H output of the Bell-state measurement.
    D1,
    /// V output of the Bell-state measurement.
    D2,
    /// Exciton analyzer, projected state.
    D3,
    /// Exciton analyzer, orthogonal state.
    D4,
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Detector {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "D1" => Ok(Detector::D1),
            "D2" => Ok(Detector::D2),
            "D3" => Ok(Detector::D3),
            "D4" => Ok(Detector::D4),
            other => Err(format!("unknown detector `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time_ps: i64,
    pub detector: Detector,
    pub cycle: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    /// Sorted by time, then detector, then cycle.
    pub events: Vec<Event>,
    pub seed: u64,
    pub n_cycles: u64,
    pub period_ps: f64,
}

impl EventStream {
    pub fn times(&self, detector: Detector) -> Vec<i64> {
        self.events
            .iter()
            .filter(|e| e.detector == detector)
            .map(|e| e.time_ps)
            .collect()
    }

    pub fn count(&self, detector: Detector) -> usize {
        self.events.iter().filter(|e| e.detector == detector).count()
    }

    /// Delimited text: metadata comments, a header, then
    /// `cycle,detector,timestamp_ps` rows.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# n_cycles={}", self.n_cycles)?;
        writeln!(w, "# period_ps={}", self.period_ps)?;
        writeln!(w, "cycle,detector,timestamp_ps")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.cycle, e.detector, e.time_ps)?;
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let err = |row: usize, reason: String| RelayError::Ingestion {
            path: path.to_path_buf(),
            row,
            reason,
        };
        let (mut seed, mut n_cycles, mut period) = (None, None, None);
        let mut events = Vec::new();
        let mut header_seen = false;
        for (k, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line?;
            let row = k + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.trim().split_once('=') {
                    let bad = |_| err(row, format!("bad value for `{key}`"));
                    match key.trim() {
                        "seed" => seed = Some(value.trim().parse::<u64>().map_err(|e| bad(e.to_string()))?),
                        "n_cycles" => n_cycles = Some(value.trim().parse::<u64>().map_err(|e| bad(e.to_string()))?),
                        "period_ps" => period = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                if line.starts_with("cycle") {
                    continue;
                }
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(row, format!("expected 3 fields, found {}", fields.len())));
            }
            let cycle = fields[0].trim().parse::<u64>().map_err(|e| err(row, e.to_string()))?;
            let detector = fields[1].parse::<Detector>().map_err(|e| err(row, e))?;
            let time_ps = fields[2].trim().parse::<i64>().map_err(|e| err(row, e.to_string()))?;
            events.push(Event { time_ps, detector, cycle });
        }
        events.sort();
        let missing = |what: &str| err(0, format!("missing `# {what}=` line"));
        Ok(Self {
            events,
            seed: seed.ok_or_else(|| missing("seed"))?,
            n_cycles: n_cycles.ok_or_else(|| missing("n_cycles"))?,
            period_ps: period.ok_or_else(|| missing("period_ps"))?,
        })
    }
}

/// Simulation settings. Efficiencies fold collection and detection into
/// one probability per photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_cycles: u64,
    pub seed: u64,
    /// Probability that a biexciton photon reaches the Bell-state measurement.
    /// Normalized surfaces do not depend on it; it only scales the counts.
    pub b_efficiency: f64,
    /// Probability that an exciton photon reaches the analyzer detectors.
    pub x_efficiency: f64,
    pub jitter_fwhm_ps: f64,
    pub batch_cycles: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_cycles: 1_000_000,
            seed: 1,
            b_efficiency: 1.0,
            x_efficiency: 1.0,
            jitter_fwhm_ps: 58.4,
            batch_cycles: 50_000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(RelayError::invalid("mc.n_cycles", "must be >= 1"));
        }
        if self.batch_cycles == 0 {
            return Err(RelayError::invalid("mc.batch_cycles", "must be >= 1"));
        }
        for (name, v) in [("mc.b_efficiency", self.b_efficiency), ("mc.x_efficiency", self.x_efficiency)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(RelayError::invalid(name, format!("{v} is outside [0, 1]")));
            }
        }
        ensure_non_negative("mc.jitter_fwhm_ps", self.jitter_fwhm_ps)
    }
}

/// Laser pulse as seen by the simulation.
#[derive(Debug, Clone)]
pub struct LaserPulse {
    pub profile: TemporalProfile,
    /// `eta_L / eta_B`.
    pub relative_intensity: f64,
    /// `omega_B - omega_L` in rad/ps.
    pub detuning_rate: f64,
    pub coherence_ps: f64,
}

impl LaserPulse {
    pub fn from_model(laser: &LaserModel, source: &SourceModel, pulses: &PulseShapeRegistry) -> Result<Self> {
        Ok(Self {
            profile: laser.profile(source, pulses)?,
            relative_intensity: laser.relative_intensity,
            detuning_rate: laser.detuning_rate(),
            coherence_ps: laser.coherence_ps,
        })
    }
}

struct Setup<'a> {
    source: &'a SourceModel,
    laser: &'a LaserPulse,
    laser_sampler: ProfileSampler,
    cascade_sampler: DelaySampler,
    laser_count: Option<Poisson<f64>>,
    jitter: Option<Normal<f64>>,
    input: PolarizationState,
    analyzer: PolarizationState,
    cfg: &'a McConfig,
}

struct Cascade {
    t_b: f64,
    t_x: f64,
    entangled: bool,
    b_click: Option<Detector>,
    x_click: Option<Detector>,
}

impl Setup<'_> {
    fn cascade_density(&self, t_b: f64, t_x: f64, cycle_start: f64) -> f64 {
        self.source.cascade.eval(t_b - cycle_start, t_x - t_b).max(0.0)
    }

    /// Probability that the exciton lands in D3 given a laser/biexciton
    /// coincidence at `t1` (D1) and `t2` (D2): both orderings contribute
    /// coherently, with a diffusing relative phase.
    fn coherent_d3(&self, t1: f64, t2: f64, t3: f64, cycle_start: f64, rng: &mut ChaCha8Rng) -> f64 {
        let il = |t: f64| self.laser.profile.at(t - cycle_start).max(0.0);
        let rho_a = il(t1) * self.cascade_density(t2, t3, cycle_start);
        let rho_b = il(t2) * self.cascade_density(t1, t3, cycle_start);
        let (a, x) = (self.input.a, self.analyzer.a);
        let (c2a, s2a) = (a.cos().powi(2), a.sin().powi(2));
        let (c2x, s2x) = (x.cos().powi(2), x.sin().powi(2));
        let den = 0.5 * (c2a * rho_a + s2a * rho_b);
        if den <= 0.0 {
            return 0.5;
        }
        let (tau2, tau3) = (t3 - t1, t3 - t2);
        let tau1 = tau2 - tau3;
        let rate = 1.0 / self.laser.coherence_ps + 1.0 / self.source.b_coherence_ps;
        let diffusion = (2.0 * tau1.abs() * rate).sqrt();
        let kick = if diffusion > 0.0 {
            Normal::new(0.0, diffusion).expect("finite").sample(rng)
        } else {
            0.0
        };
        let theta = self.laser.detuning_rate * tau1 - self.source.s * (tau2 + tau3)
            + self.analyzer.b
            + self.input.b
            + kick;
        let cross = 0.25 * (2.0 * a).sin() * (2.0 * x).sin() * (rho_a * rho_b).sqrt() * theta.cos();
        let num = 0.5 * (c2a * s2x * rho_a + s2a * c2x * rho_b) + cross;
        (num / den).clamp(0.0, 1.0)
    }

    fn analyzer_click(&self, x_is_h: bool, rng: &mut ChaCha8Rng) -> Detector {
        let x = self.analyzer.a;
        let p3 = if x_is_h { x.cos().powi(2) } else { x.sin().powi(2) };
        if rng.gen::<f64>() < p3 {
            Detector::D3
        } else {
            Detector::D4
        }
    }

    fn cycle(&self, cycle: u64, rng: &mut ChaCha8Rng, out: &mut Vec<Event>) {
        let p = self.source.period();
        let t0 = cycle as f64 * p;
        let (c2a, s2a) = (self.input.a.cos().powi(2), self.input.a.sin().powi(2));
        let mut lasers: Vec<(f64, Detector)> = Vec::new();
        if let Some(pois) = &self.laser_count {
            let n = pois.sample(rng) as usize;
            for _ in 0..n {
                let t = t0 + self.laser_sampler.sample(rng);
                if rng.gen::<bool>() {
                    if rng.gen::<f64>() < c2a {
                        lasers.push((t, Detector::D1));
                    }
                } else if rng.gen::<f64>() < s2a {
                    lasers.push((t, Detector::D2));
                }
            }
        }
        let u: f64 = rng.gen();
        let q2 = self.source.double_pair_prob;
        let k = if u < 1.0 - self.source.pair_prob {
            0
        } else if u < 1.0 - q2 {
            1
        } else {
            2
        };
        let mut cascades = Vec::with_capacity(k);
        for _ in 0..k {
            let (u, delta) = self.cascade_sampler.sample(rng);
            let t_b = t0 + u;
            let t_x = t_b + delta;
            let entangled = rng.gen::<f64>() < self.source.entangled_fraction;
            let b_is_h = rng.gen::<bool>();
            let x_is_h = if entangled { b_is_h } else { rng.gen::<bool>() };
            let b_click = if rng.gen::<f64>() < self.cfg.b_efficiency {
                let port_h = rng.gen::<bool>();
                match (port_h, b_is_h) {
                    (true, true) => Some(Detector::D1),
                    (false, false) => Some(Detector::D2),
                    _ => None,
                }
            } else {
                None
            };
            let x_click = if rng.gen::<f64>() < self.cfg.x_efficiency {
                Some(self.analyzer_click(x_is_h, rng))
            } else {
                None
            };
            cascades.push(Cascade { t_b, t_x, entangled, b_click, x_click });
        }
        for c in cascades.iter_mut().filter(|c| c.entangled) {
            let (Some(b_det), Some(_)) = (c.b_click, c.x_click) else {
                continue;
            };
            let partner = if b_det == Detector::D1 { Detector::D2 } else { Detector::D1 };
            if let Some(&(t_l, _)) = lasers.iter().find(|l| l.1 == partner) {
                let (t1, t2) = if b_det == Detector::D2 { (t_l, c.t_b) } else { (c.t_b, t_l) };
                let p3 = self.coherent_d3(t1, t2, c.t_x, t0, rng);
                c.x_click = Some(if rng.gen::<f64>() < p3 { Detector::D3 } else { Detector::D4 });
            }
        }
        let mut tag = |t: f64, detector: Detector, rng: &mut ChaCha8Rng| {
            let jitter = self.jitter.map_or(0.0, |n| n.sample(rng));
            let time_ps = ((t + jitter) / TAG_RESOLUTION_PS as f64).floor() as i64 * TAG_RESOLUTION_PS;
            out.push(Event { time_ps, detector, cycle });
        };
        for (t, d) in lasers {
            tag(t, d, rng);
        }
        for c in &cascades {
            if let Some(d) = c.b_click {
                tag(c.t_b, d, rng);
            }
            if let Some(d) = c.x_click {
                tag(c.t_x, d, rng);
            }
        }
    }
}

/// Simulates `cfg.n_cycles` excitation cycles. Batches draw from
/// independent streams of one seeded generator, so the result does not
/// depend on the number of worker threads.
pub fn simulate_events(
    source: &SourceModel,
    laser: &LaserPulse,
    input: PolarizationState,
    analyzer: PolarizationState,
    cfg: &McConfig,
) -> Result<EventStream> {
    cfg.validate()?;
    ensure_non_negative("laser.relative_intensity", laser.relative_intensity)?;
    ensure_positive("laser.coherence_ps", laser.coherence_ps)?;
    if !laser.profile.grid().same_as(&source.grid()) {
        return Err(RelayError::GridMismatch("laser profile and source use different grids".into()));
    }
    let grid = source.grid();
    let mu_l = laser.relative_intensity * source.mean_cascades() * cfg.b_efficiency;
    let sigma = if cfg.jitter_fwhm_ps > 0.0 {
        // the time tags add their own quantization on top
        detector_sigma(cfg.jitter_fwhm_ps, 0.0)
    } else {
        0.0
    };
    let setup = Setup {
        source,
        laser,
        laser_sampler: ProfileSampler::new(laser.profile.samples(), grid.dt, Edges::Periodic),
        cascade_sampler: DelaySampler::new(&source.cascade),
        laser_count: if mu_l > 0.0 { Some(Poisson::new(mu_l).expect("positive mean")) } else { None },
        jitter: if sigma > 0.0 { Some(Normal::new(0.0, sigma).expect("finite")) } else { None },
        input,
        analyzer,
        cfg,
    };
    let n_batches = cfg.n_cycles.div_ceil(cfg.batch_cycles);
    let batches: Vec<Vec<Event>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let start = b * cfg.batch_cycles;
            let end = (start + cfg.batch_cycles).min(cfg.n_cycles);
            let mut out = Vec::new();
            for c in start..end {
                setup.cycle(c, &mut rng, &mut out);
            }
            out
        })
        .collect();
    let mut events: Vec<Event> = batches.into_iter().flatten().collect();
    events.par_sort_unstable();
    Ok(EventStream {
        events,
        seed: cfg.seed,
        n_cycles: cfg.n_cycles,
        period_ps: source.period(),
    })
}

#[cfg(test)]
mod tests;
