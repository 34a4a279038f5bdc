use super::*;
use crate::engine::TauAxis;
use crate::optics::{LaserModel, PulseShapeRegistry, SourceParams};

fn source() -> SourceModel {
    SourceModel::build(&SourceParams::default()).unwrap()
}

fn laser(src: &SourceModel) -> LaserPulse {
    LaserPulse::from_model(&LaserModel::default(), src, &PulseShapeRegistry::with_defaults()).unwrap()
}

fn cfg(n: u64, seed: u64) -> McConfig {
    McConfig { n_cycles: n, seed, batch_cycles: 2_000, ..McConfig::default() }
}

#[test]
fn no_photons_means_no_events() {
    let src = source();
    let mut l = laser(&src);
    l.relative_intensity = 0.0;
    let c = McConfig { b_efficiency: 0.0, x_efficiency: 0.0, ..cfg(5_000, 3) };
    let s = simulate_events(&src, &l, PolarizationState::D, PolarizationState::D, &c).unwrap();
    assert!(s.events.is_empty());
}

#[test]
fn seeded_runs_are_identical() {
    let src = source();
    let l = laser(&src);
    let a = simulate_events(&src, &l, PolarizationState::D, PolarizationState::D, &cfg(20_000, 9)).unwrap();
    let b = simulate_events(&src, &l, PolarizationState::D, PolarizationState::D, &cfg(20_000, 9)).unwrap();
    let c = simulate_events(&src, &l, PolarizationState::D, PolarizationState::D, &cfg(20_000, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.events, c.events);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let d = pool
        .install(|| simulate_events(&src, &l, PolarizationState::D, PolarizationState::D, &cfg(20_000, 9)))
        .unwrap();
    assert_eq!(a, d);
}

#[test]
fn timestamps_are_sorted_and_quantized() {
    let src = source();
    let s = simulate_events(&src, &laser(&src), PolarizationState::H, PolarizationState::V, &cfg(5_000, 1)).unwrap();
    assert!(!s.events.is_empty());
    assert!(s.events.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
    assert!(s.events.iter().all(|e| e.time_ps % TAG_RESOLUTION_PS == 0));
}

#[test]
fn export_round_trip() {
    let src = source();
    let s = simulate_events(&src, &laser(&src), PolarizationState::D, PolarizationState::A, &cfg(2_000, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    s.export(&path).unwrap();
    assert_eq!(EventStream::import(&path).unwrap(), s);
    std::fs::write(&path, "# seed=1\n# n_cycles=1\n# period_ps=4926\ncycle,detector,timestamp_ps\n0,D9,16\n").unwrap();
    match EventStream::import(&path) {
        Err(RelayError::Ingestion { row, .. }) => assert_eq!(row, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let src = source();
    let l = laser(&src);
    let bad = McConfig { n_cycles: 0, ..McConfig::default() };
    assert!(simulate_events(&src, &l, PolarizationState::H, PolarizationState::H, &bad).is_err());
    let bad = McConfig { b_efficiency: 1.5, ..McConfig::default() };
    assert!(simulate_events(&src, &l, PolarizationState::H, PolarizationState::H, &bad).is_err());
}

fn synthetic(events: Vec<Event>, n_cycles: u64, period: f64) -> EventStream {
    let mut events = events;
    events.sort();
    EventStream { events, seed: 0, n_cycles, period_ps: period }
}

#[test]
fn independent_events_give_a_flat_surface() {
    use rand::Rng;
    // three independent Poisson streams with no time structure
    let period = 320.0;
    let span = 2_000_000i64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut events = Vec::new();
    for d in [Detector::D1, Detector::D2, Detector::D3] {
        for _ in 0..20_000 {
            let t = rng.gen_range(0..span / 16) * 16;
            events.push(Event { time_ps: t, detector: d, cycle: 0 });
        }
    }
    let s = synthetic(events, 1, period);
    let axis = TauAxis::new(480.0, 16.0).unwrap();
    let h = histogram_g3(&s, Detector::D3, axis).unwrap();
    assert_eq!(h.n_triples, h.counts.iter().sum::<u64>());
    let mean = h.surface.sum() / h.surface.values().len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
    let g2 = histogram_g2(&s, (Detector::D1, Detector::D1), TauAxis::new(640.0, 16.0).unwrap()).unwrap();
    let m2 = g2.values.iter().sum::<f64>() / g2.values.len() as f64;
    assert!((m2 - 1.0).abs() < 0.1, "{m2}");
}

#[test]
fn missing_detector_gives_an_empty_surface() {
    let events = vec![
        Event { time_ps: 0, detector: Detector::D1, cycle: 0 },
        Event { time_ps: 32, detector: Detector::D3, cycle: 0 },
    ];
    let s = synthetic(events, 1, 100.0);
    let h = histogram_g3(&s, Detector::D3, TauAxis::new(160.0, 16.0).unwrap()).unwrap();
    assert_eq!(h.n_triples, 0);
    assert!(h.surface.values().iter().all(|v| *v == 0.0));
}

#[test]
fn triples_are_counted_exactly() {
    let ev = |t, d| Event { time_ps: t, detector: d, cycle: 0 };
    let s = synthetic(
        vec![
            ev(0, Detector::D1),
            ev(16, Detector::D1),
            ev(48, Detector::D2),
            ev(64, Detector::D3),
            ev(9_000, Detector::D3),
        ],
        1,
        100.0,
    );
    let axis = TauAxis::new(160.0, 16.0).unwrap();
    let h = histogram_g3(&s, Detector::D3, axis).unwrap();
    assert_eq!(h.n_triples, 2);
    let n = axis.len();
    assert_eq!(h.counts[axis.index_of(64.0).unwrap() * n + axis.index_of(16.0).unwrap()], 1);
    assert_eq!(h.counts[axis.index_of(48.0).unwrap() * n + axis.index_of(16.0).unwrap()], 1);
}

#[test]
fn cascade_ordering_shows_in_the_bx_correlation() {
    let src = source();
    let mut l = laser(&src);
    l.relative_intensity = 0.0;
    let s = simulate_events(&src, &l, PolarizationState::H, PolarizationState::H, &cfg(200_000, 2)).unwrap();
    let axis = TauAxis::new(2.0 * src.period() + 200.0, 16.0).unwrap();
    let g = histogram_g2(&s, (Detector::D1, Detector::D3), axis).unwrap();
    let (peak_tau, _) = g
        .taus
        .iter()
        .zip(&g.values)
        .filter(|(t, _)| t.abs() < 0.5 * src.period())
        .fold((0.0, f64::MIN), |b, (&t, &v)| if v > b.1 { (t, v) } else { b });
    assert!(peak_tau > 0.0 && peak_tau < 400.0, "{peak_tau}");
}
