use ladder_memory::memory::{simulate_storage_retrieval, MemoryConfig, PulseSet};
use ladder_memory::optimize::{
    grid_search, nelder_mead, objective, run_ga, DriftModel, GaSettings, ParamName, ParameterRange, ParameterSpace,
    ShotNoise,
};
use proptest::prelude::*;

fn small() -> GaSettings {
    GaSettings { population: 8, generations: 3, ..GaSettings::default() }
}

fn slice() -> ParameterSpace {
    ParameterSpace::energy_detuning_slice(PulseSet::default())
}

#[test]
fn objective_at_operating_point() {
    let space = ParameterSpace::full(PulseSet::default());
    let v = objective(&space, &MemoryConfig::default(), &space.start(), 0.0, None);
    assert!(v.fault.is_none());
    assert!((v.value - 0.845).abs() < 0.01, "{}", v.value);
    // the start point is snapped to the search resolution
    let r = simulate_storage_retrieval(&MemoryConfig::default(), &space.apply(&space.start()).unwrap()).unwrap();
    assert_eq!(v.value, r.count_ratio());
}

#[test]
fn objective_without_control_is_zero() {
    let space =
        ParameterSpace::new(vec![ParameterRange::new(ParamName::WriteEnergyNj, 0.0, 0.6, 0.0)], PulseSet::default())
            .unwrap();
    let v = objective(&space, &MemoryConfig::default(), &[0.0], 0.0, None);
    assert_eq!(v.value, 0.0);
    assert!(v.fault.is_none());
    // outside the bounds scores zero with a fault
    let v = objective(&space, &MemoryConfig::default(), &[0.7], 0.0, None);
    assert_eq!(v.value, 0.0);
    assert!(v.fault.is_some());
}

#[test]
fn cavity_drift_lowers_objective() {
    let space = slice();
    let x = space.start();
    let on = objective(&space, &MemoryConfig::default(), &x, 0.0, None).value;
    let off = objective(&space, &MemoryConfig::default(), &x, 0.3, None).value;
    assert!(off < on, "{off} vs {on}");
}

#[test]
fn shot_noise_is_keyed() {
    let space = slice();
    let x = space.start();
    let n = ShotNoise { relative_sd: 0.05, seed: 4 };
    let a = objective(&space, &MemoryConfig::default(), &x, 0.0, Some((n, 2, 3))).value;
    let b = objective(&space, &MemoryConfig::default(), &x, 0.0, Some((n, 2, 3))).value;
    let c = objective(&space, &MemoryConfig::default(), &x, 0.0, Some((n, 2, 4))).value;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn zero_generations_evaluates_only_the_first_population() {
    let s = GaSettings { generations: 0, ..small() };
    let t = run_ga(&slice(), &MemoryConfig::default(), &DriftModel::default(), &s, 1).unwrap();
    assert_eq!(t.evaluations.len(), 8);
    assert_eq!(t.generations.len(), 1);
    // the base point comes first
    assert_eq!(t.evaluations[0].parameters, slice().start());
}

#[test]
fn ga_is_reproducible_and_respects_bounds() {
    let space = ParameterSpace::full(PulseSet::default());
    let drift = DriftModel { enabled: true, ..DriftModel::default() };
    let s = GaSettings { shot_noise: Some(0.02), ..small() };
    let a = run_ga(&space, &MemoryConfig::default(), &drift, &s, 99).unwrap();
    let b = run_ga(&space, &MemoryConfig::default(), &drift, &s, 99).unwrap();
    assert_eq!(a, b);
    let c = run_ga(&space, &MemoryConfig::default(), &drift, &s, 100).unwrap();
    assert_ne!(a.evaluations, c.evaluations);
    for e in &a.evaluations {
        assert!(space.contains(&e.parameters), "{e:?}");
        for (r, v) in space.parameters.iter().zip(&e.parameters) {
            let k = (v - r.min) / r.resolution;
            assert!((k - k.round()).abs() < 1e-6 || *v == r.max, "{} = {v}", r.name.as_str());
        }
    }
    // parents re-measured every later generation under drift
    assert_eq!(a.evaluations.len(), 8 + 3 * 16);
}

#[test]
fn records_can_be_replayed() {
    let drift = DriftModel { enabled: true, ..DriftModel::default() };
    let s = GaSettings { shot_noise: Some(0.02), ..small() };
    let space = slice();
    let t = run_ga(&space, &MemoryConfig::default(), &drift, &s, 5).unwrap();
    let noise = ShotNoise { relative_sd: 0.02, seed: 5 };
    for e in t.evaluations.iter().step_by(5) {
        assert_eq!(e.drift_ghz, drift.offset(e.iteration, 5));
        let v = objective(
            &space,
            &MemoryConfig::default(),
            &e.parameters,
            e.drift_ghz,
            Some((noise, e.iteration as u64, e.individual as u64)),
        );
        assert_eq!(v.value, e.objective);
    }
}

#[test]
fn best_so_far_never_drops_without_drift() {
    let s = GaSettings { generations: 4, ..small() };
    let t = run_ga(&slice(), &MemoryConfig::default(), &DriftModel::default(), &s, 3).unwrap();
    for w in t.generations.windows(2) {
        assert!(w[1].best_objective >= w[0].best_objective);
        assert!(w[1].best_so_far >= w[0].best_so_far);
    }
    assert_eq!(t.best().unwrap().objective, t.generations.last().unwrap().best_so_far);
}

#[test]
fn disabled_drift_is_zero() {
    let d = DriftModel::default();
    assert!(!d.enabled);
    for i in [0, 1, 50, 1000] {
        assert_eq!(d.offset(i, 7), 0.0);
    }
    let on = DriftModel { enabled: true, noise_sd_ghz: 0.0, ..d };
    assert!((on.offset(10, 7) - 10.0 * 0.0025 * 3.2).abs() < 1e-12);
    let r = DriftModel::thermal_ramp(0.01, 3.2, 0.0);
    assert!((r.offset(5, 0) - 0.16).abs() < 1e-12);
}

#[test]
fn bad_settings_rejected() {
    let cfg = MemoryConfig::default();
    for s in [
        GaSettings { population: 4, ..small() },
        GaSettings { tournament_size: 0, ..small() },
        GaSettings { crossover_probability: 1.5, ..small() },
        GaSettings { shot_noise: Some(-0.1), ..small() },
    ] {
        assert!(run_ga(&slice(), &cfg, &DriftModel::default(), &s, 0).is_err());
    }
    assert!(ParameterSpace::new(vec![], PulseSet::default()).is_err());
    let twice = vec![
        ParameterRange::new(ParamName::WriteEnergyNj, 0.0, 1.0, 0.0),
        ParameterRange::new(ParamName::WriteEnergyNj, 0.0, 1.0, 0.0),
    ];
    assert!(ParameterSpace::new(twice, PulseSet::default()).is_err());
}

#[test]
fn grid_search_matches_objective() {
    let space = slice();
    let axes = vec![vec![0.1, 0.2, 0.3], vec![-0.01, 0.0]];
    let g = grid_search(&space, &MemoryConfig::default(), &axes).unwrap();
    assert_eq!(g.values.len(), 6);
    for (k, v) in g.values.iter().enumerate() {
        let x = [axes[0][k / 2], axes[1][k % 2]];
        assert_eq!(*v, objective(&space, &MemoryConfig::default(), &x, 0.0, None).value);
    }
    assert_eq!(g.best_value, g.values.iter().cloned().fold(f64::MIN, f64::max));
    assert!(grid_search(&ParameterSpace::full(PulseSet::default()), &MemoryConfig::default(), &axes).is_err());
}

#[test]
fn nelder_mead_finds_rosenbrock_minimum() {
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let m = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 1e-14, 5000);
    assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{m:?}");
    assert!(m.evaluations <= 5000 + 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snap_stays_in_range(v in -10.0f64..10.0, lo in -5.0f64..0.0, span in 0.1f64..5.0, res in 0.0f64..0.3) {
        let r = ParameterRange::new(ParamName::WriteEnergyNj, lo, lo + span, res);
        let s = r.snap(v);
        prop_assert!(s >= r.min && s <= r.max);
        prop_assert_eq!(r.snap(s), s);
    }

    #[test]
    fn drift_offset_is_pure(i in 0usize..10_000, seed in any::<u64>()) {
        let d = DriftModel { enabled: true, ..DriftModel::default() };
        prop_assert_eq!(d.offset(i, seed), d.offset(i, seed));
    }
}
