//! One function per subcommand. Each writes into the configured output
//! directory and echoes the resolved configuration there first.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use relay_core::analysis::{
    average_fidelity, bell_parameter, diagonal_cut, expected_output, key_rate, orthogonal, qber_check,
    relay_fidelity, FidelityMap, KeyRateInput, QberClass, CLASSICAL_LIMIT, CORRECTION_THRESHOLD,
};
use relay_core::engine::{CorrelationSurface, Engine, Strategies, TauAxis};
use relay_core::export::{
    load_surface, save_grid, save_json, save_series, save_surface, surface_summary, SurfaceFile, SurfaceSummary,
};
use relay_core::mc::{
    compare, histogram_g2, histogram_g3, plateau_cells, simulate_events, Comparison, Detector,
    G3Histogram, LaserPulse,
};
use relay_core::optics::{PolarizationState, SourceModel};
use relay_core::sweep::{sweep, FidelityProbe, SearchRegistry, SweepPoint, SweepSpec};
use serde::Serialize;

use crate::config::{RunConfig, RESOLVED_CONFIG};

const STATES: [PolarizationState; 4] =
    [PolarizationState::H, PolarizationState::V, PolarizationState::D, PolarizationState::A];

/// A validated configuration with its output directory in place.
pub struct Run {
    pub cfg: RunConfig,
    pub source: SourceModel,
    out: PathBuf,
}

impl Run {
    pub fn prepare(cfg: RunConfig) -> Result<Self> {
        let source = cfg.validate()?;
        let out = cfg.run.out_dir.clone();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        std::fs::write(out.join(RESOLVED_CONFIG), cfg.to_toml()?)?;
        Ok(Self { cfg, source, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn engine(&self) -> Result<Engine> {
        Ok(Engine::new(Arc::new(self.source.clone()), &self.cfg.laser, &self.cfg.engine, &Strategies::default())?)
    }

    fn laser_comments(&self) -> Vec<(&'static str, String)> {
        let l = &self.cfg.laser;
        vec![
            ("laser_fwhm_ps", l.fwhm_ps.to_string()),
            ("laser_delay_ps", l.delay_ps.to_string()),
            ("relative_intensity", l.relative_intensity.to_string()),
        ]
    }
}

/// `(expected - unexpected) / (expected + unexpected)`, `NaN` where the sum
/// vanishes.
fn contrast(e: &CorrelationSurface, u: &CorrelationSurface) -> Result<CorrelationSurface> {
    let v = e
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, b)| if a + b > 0.0 { (a - b) / (a + b) } else { f64::NAN })
        .collect();
    Ok(CorrelationSurface::from_values(e.axis(), v)?)
}

#[derive(Serialize)]
struct G3Summary {
    surfaces: Vec<SurfaceSummary>,
}

pub fn g3(run: &Run) -> Result<()> {
    let engine = run.engine()?;
    let extra = run.laser_comments();
    let mut surfaces = Vec::new();
    for s in STATES {
        let a = expected_output(s);
        let e = engine.surface(s, a).with_label("g3-expected");
        let u = engine.surface(s, orthogonal(a)).with_label("g3-unexpected");
        let mut t = e.clone();
        t.add_scaled(&u, 1.0, false);
        let t = t.with_label("g3-total");
        for (name, surf) in [("expected", &e), ("unexpected", &u), ("total", &t)] {
            save_surface(&run.path(&format!("g3_{s}_{name}.csv")), surf, &extra)?;
            surfaces.push(surface_summary(surf, None));
        }
        let mut c = contrast(&e, &u)?.with_label("contrast");
        c.meta.input = Some(s);
        save_surface(&run.path(&format!("contrast_{s}.csv")), &c, &extra)?;
    }
    save_json(&run.path("g3_summary.json"), &G3Summary { surfaces })?;
    Ok(())
}

#[derive(Serialize)]
struct StateFidelity {
    state: String,
    at_zero: Option<f64>,
}

#[derive(Serialize)]
struct FidelitySummary {
    window: relay_core::engine::Window,
    states: Vec<StateFidelity>,
    average_at_zero: Option<f64>,
    /// Largest average within one period of the origin: `[tau2, tau3, F]`.
    average_peak: Option<(f64, f64, f64)>,
    diagonal_peak: Option<(f64, f64)>,
    peak_qber_class: Option<QberClass>,
    classical_limit: f64,
    correction_threshold: f64,
}

pub fn fidelity(run: &Run) -> Result<()> {
    let engine = run.engine()?.windowed(&run.cfg.window)?;
    let extra = run.laser_comments();
    let mut maps = Vec::new();
    let mut states = Vec::new();
    for s in STATES {
        let a = expected_output(s);
        let map = relay_fidelity(&engine.surface(s, a), &engine.surface(s, orthogonal(a)), None)?;
        let mut surf = map.to_surface().with_label("fidelity");
        surf.meta.input = Some(s);
        surf.meta.analyzer = Some(a);
        save_surface(&run.path(&format!("fidelity_{s}.csv")), &surf, &extra)?;
        states.push(StateFidelity { state: s.to_string(), at_zero: map.at(0.0, 0.0) });
        maps.push(map);
    }
    let avg: FidelityMap = average_fidelity(&maps)?;
    save_surface(&run.path("fidelity_average.csv"), &avg.to_surface().with_label("fidelity-average"), &extra)?;
    let cut = diagonal_cut(&avg);
    let values: Vec<f64> = cut.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    save_series(
        &run.path("diagonal_cut.csv"),
        &[("tau_ps", &cut.taus), ("fidelity", &values)],
        &[
            ("classical_limit", CLASSICAL_LIMIT.to_string()),
            ("correction_threshold", CORRECTION_THRESHOLD.to_string()),
        ],
    )?;
    let average_peak = avg.peak_within(run.source.period());
    let summary = FidelitySummary {
        window: run.cfg.window,
        states,
        average_at_zero: avg.at(0.0, 0.0),
        average_peak,
        diagonal_peak: cut.peak(),
        peak_qber_class: average_peak.map(|p| qber_check(p.2)).transpose()?,
        classical_limit: CLASSICAL_LIMIT,
        correction_threshold: CORRECTION_THRESHOLD,
    };
    save_json(&run.path("fidelity_summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct BellSummary {
    s_at_zero: f64,
    /// Largest `S` and its delay.
    s_max: (f64, f64),
    classical_bound: f64,
}

pub fn bell(run: &Run) -> Result<()> {
    let b = bell_parameter(&run.source, &run.cfg.engine)?;
    save_series(
        &run.path("bell.csv"),
        &[("tau_ps", &b.taus), ("c_rectilinear", &b.rectilinear), ("c_diagonal", &b.diagonal), ("s", &b.s)],
        &[],
    )?;
    let s_max = b.taus.iter().zip(&b.s).fold((0.0, f64::NEG_INFINITY), |m, (&t, &s)| if s > m.1 { (t, s) } else { m });
    save_json(&run.path("bell.json"), &BellSummary { s_at_zero: b.at_zero(), s_max, classical_bound: 2.0 })?;
    Ok(())
}

#[derive(Serialize)]
struct KeyRateSummary {
    q_z: f64,
    q_x: f64,
    rate: f64,
}

/// Returns the rate after writing it; the caller prints it.
pub fn keyrate(run: &Run, q_z: f64, q_x: f64) -> Result<f64> {
    let rate = key_rate(KeyRateInput::new(q_z, q_x)?)?;
    save_json(&run.path("keyrate.json"), &KeyRateSummary { q_z, q_x, rate })?;
    Ok(rate)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    spec: &'a SweepSpec,
    optimum: SweepPoint,
    /// `[width_min, width_max, delay_min, delay_max]` of the points within
    /// 1% of the optimum.
    plateau_box_1pct: (f64, f64, f64, f64),
    max_intensity: f64,
}

pub fn sweep_cmd(run: &Run) -> Result<()> {
    let probe = FidelityProbe::new(
        Arc::new(run.source.clone()),
        &run.cfg.laser,
        &run.cfg.engine,
        &run.cfg.window,
        run.cfg.sweep.peak_radius_ps,
        &Strategies::default(),
    )?;
    let r = sweep(&run.cfg.sweep, &probe, &SearchRegistry::default())?;
    let corner = "width_ps\\delay_ps";
    save_grid(&run.path("sweep_fidelity.csv"), corner, &r.widths_ps, &r.delays_ps, &r.fidelity)?;
    save_grid(&run.path("sweep_intensity.csv"), corner, &r.widths_ps, &r.delays_ps, &r.intensity)?;
    save_json(
        &run.path("sweep_summary.json"),
        &SweepSummary {
            spec: &run.cfg.sweep,
            optimum: r.optimum,
            plateau_box_1pct: r.plateau_box(0.01),
            max_intensity: r.intensity.iter().copied().fold(0.0, f64::max),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct McSummary {
    input: String,
    seed: u64,
    n_cycles: u64,
    period_ps: f64,
    events: usize,
    triples: Vec<(String, u64)>,
    plateau: Vec<(String, f64)>,
    g2_xx_zero: Option<f64>,
}

pub fn mc(run: &Run, write_events: bool) -> Result<()> {
    let cfg = &run.cfg;
    let input = cfg.mc_input()?;
    let laser = LaserPulse::from_model(&cfg.laser, &run.source, &Default::default())?;
    let stream = simulate_events(&run.source, &laser, input, expected_output(input), &cfg.mc)?;
    if write_events {
        stream.export(&run.path("events.csv"))?;
    }
    let axis = cfg.engine.validate(&run.source)?;
    let mut triples = Vec::new();
    let mut plateau = Vec::new();
    for d in [Detector::D3, Detector::D4] {
        let h = histogram_g3(&stream, d, axis)?;
        let counts: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
        let mut surf = CorrelationSurface::from_values(axis, counts)?.with_label("counts");
        surf.meta.input = Some(input);
        save_surface(&run.path(&format!("hist_{d}.csv")), &surf, &[
            ("detector", d.to_string()),
            ("plateau", h.plateau.to_string()),
            ("period_ps", stream.period_ps.to_string()),
            ("seed", stream.seed.to_string()),
            ("n_cycles", stream.n_cycles.to_string()),
            ("n_triples", h.n_triples.to_string()),
        ])?;
        triples.push((d.to_string(), h.n_triples));
        plateau.push((d.to_string(), h.plateau));
    }
    // the two analyzer outputs act as a beam-splitter pair for the exciton
    let g2_axis = TauAxis::new(2.0 * stream.period_ps + 4.0 * axis.step, axis.step)?;
    let g2 = histogram_g2(&stream, (Detector::D3, Detector::D4), g2_axis)?;
    save_series(
        &run.path("g2_xx.csv"),
        &[("tau_ps", &g2.taus), ("g2", &g2.values)],
        &[("plateau", g2.plateau.to_string())],
    )?;
    save_json(
        &run.path("mc_summary.json"),
        &McSummary {
            input: input.to_string(),
            seed: stream.seed,
            n_cycles: stream.n_cycles,
            period_ps: stream.period_ps,
            events: stream.events.len(),
            triples,
            plateau,
            g2_xx_zero: g2.at(0.0),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct DetectorComparison {
    detector: String,
    analytic_file: String,
    cells: usize,
    within_3_sigma: usize,
    fraction_within: f64,
    max_abs_z: f64,
    mean_z: f64,
    rms_difference: f64,
    passed: bool,
}

impl DetectorComparison {
    fn new(detector: Detector, analytic_file: &Path, c: &Comparison) -> Self {
        Self {
            detector: detector.to_string(),
            analytic_file: analytic_file.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            cells: c.cells.len(),
            within_3_sigma: c.within_3_sigma,
            fraction_within: c.fraction_within,
            max_abs_z: c.max_abs_z,
            mean_z: c.mean_z,
            rms_difference: c.rms_difference,
            passed: c.passed,
        }
    }
}

fn histogram_from(file: &SurfaceFile, period: f64) -> Result<G3Histogram> {
    let counts: Vec<u64> = file
        .surface
        .values()
        .iter()
        .map(|&v| if v >= 0.0 && v.fract() == 0.0 { Ok(v as u64) } else { bail!("counts must be whole numbers, found {v}") })
        .collect::<Result<_>>()?;
    let cells = plateau_cells(file.surface.axis(), period)?;
    let plateau = cells.iter().map(|&k| counts[k] as f64).sum::<f64>() / cells.len() as f64;
    let mut surface = file.surface.clone();
    surface.scale(if plateau > 0.0 { 1.0 / plateau } else { 0.0 });
    Ok(G3Histogram { n_triples: counts.iter().sum(), counts, surface, plateau })
}

/// Returns whether every detector passed.
pub fn compare_cmd(run: &Run, analytic_dir: &Path, mc_dir: &Path, min_expected: f64) -> Result<bool> {
    let mut results = Vec::new();
    for (d, kind) in [(Detector::D3, "expected"), (Detector::D4, "unexpected")] {
        let hist_path = mc_dir.join(format!("hist_{d}.csv"));
        let file = load_surface(&hist_path).with_context(|| format!("reading {}", hist_path.display()))?;
        let period = file.number("period_ps").context("histogram lacks a `period_ps` comment")?;
        let input = file.surface.meta.input.context("histogram lacks an `input` comment")?;
        let analytic_path = analytic_dir.join(format!("g3_{input}_{kind}.csv"));
        let analytic =
            load_surface(&analytic_path).with_context(|| format!("reading {}", analytic_path.display()))?;
        let hist = histogram_from(&file, period)?;
        let c = compare(&analytic.surface, &hist, period, min_expected, None)
            .with_context(|| format!("comparing {} with {}", analytic_path.display(), hist_path.display()))?;
        results.push(DetectorComparison::new(d, &analytic_path, &c));
    }
    let passed = results.iter().all(|r| r.passed);
    save_json(&run.path("compare.json"), &results)?;
    Ok(passed)
}

