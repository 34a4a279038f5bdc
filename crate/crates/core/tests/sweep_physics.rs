use std::sync::Arc;

use relay_core::engine::{EngineConfig, Strategies, Window};
use relay_core::optics::{LaserModel, SourceModel, SourceParams};
use relay_core::sweep::{peak_fidelity_at, sweep, FidelityProbe, SearchRegistry, Span, SweepSpec};

fn probe() -> FidelityProbe {
    let src = Arc::new(SourceModel::build(&SourceParams::default()).unwrap());
    FidelityProbe::new(src, &LaserModel::default(), &EngineConfig::default(), &Window::default(), None, &Strategies::default())
        .unwrap()
}

fn single(width: f64, delay: f64) -> SweepSpec {
    SweepSpec { width_ps: Span::single(width), delay_ps: Span::single(delay), ..SweepSpec::default() }
}

#[test]
fn no_laser_means_no_relay() {
    let f = probe().peak_fidelity_at(950.0, 600.0, 0.0).unwrap();
    assert!(f < 0.75, "{f}");
}

#[test]
fn single_point_sweep_matches_direct_evaluation() {
    let p = probe();
    let r = sweep(&single(950.0, 600.0), &p, &SearchRegistry::default()).unwrap();
    assert_eq!(r.fidelity.len(), 1);
    let o = r.optimum;
    assert!(o.intensity > 0.0 && o.intensity <= 3.5);
    assert_eq!(o.fidelity, p.peak_fidelity_at(950.0, 600.0, o.intensity).unwrap());
    let src = Arc::new(SourceModel::build(&SourceParams::default()).unwrap());
    let direct = peak_fidelity_at(
        src,
        &LaserModel::default(),
        950.0,
        600.0,
        o.intensity,
        &EngineConfig::default(),
        &Window::default(),
    )
    .unwrap();
    assert_eq!(o.fidelity, direct);
}

#[test]
fn finer_search_tolerance_barely_moves_the_optimum() {
    let p = probe();
    let coarse = sweep(&single(1000.0, -600.0), &p, &SearchRegistry::default()).unwrap().optimum;
    let fine_spec = SweepSpec { intensity_tolerance: 1e-4, ..single(1000.0, -600.0) };
    let fine = sweep(&fine_spec, &p, &SearchRegistry::default()).unwrap().optimum;
    assert!((fine.fidelity - coarse.fidelity).abs() < 1e-3, "{coarse:?} {fine:?}");
    assert!(fine.fidelity >= coarse.fidelity - 1e-9);
}

#[test]
fn wide_pulses_wash_out_the_overlap() {
    let p = probe();
    let spec = SweepSpec {
        width_ps: Span::new(1000.0, 4600.0, 1800.0),
        delay_ps: Span::single(0.0),
        ..SweepSpec::default()
    };
    let r = sweep(&spec, &p, &SearchRegistry::default()).unwrap();
    assert_eq!(r.widths_ps, vec![1000.0, 2800.0, 4600.0]);
    assert!(r.fidelity.windows(2).all(|w| w[1] < w[0]), "{:?}", r.fidelity);
}
