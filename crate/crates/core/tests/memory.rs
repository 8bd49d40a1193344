use ladder_memory::cavity::CavityParams;
use ladder_memory::memory::{
    amplitude_trace, decay_envelope, dephasing_kernel, envelope_lifetime, lifetime_model, lifetime_scan,
    simulate_storage_retrieval, snr, total_efficiency, DecayParams, MemoryConfig, PulseSet,
};
use ladder_memory::Error;
use proptest::prelude::*;

fn lossless() -> MemoryConfig {
    MemoryConfig { insertion_loss: 0.0, ..MemoryConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the dynamics are linear in the signal amplitude
    #[test]
    fn efficiency_independent_of_signal_energy(n in 0.01f64..50.0) {
        let c = MemoryConfig::default();
        let mut p = PulseSet::default();
        let base = simulate_storage_retrieval(&c, &p).unwrap();
        p.signal.energy = n;
        let r = simulate_storage_retrieval(&c, &p).unwrap();
        prop_assert!((r.internal_efficiency / base.internal_efficiency - 1.0).abs() < 1e-9);
        prop_assert!((r.total_efficiency / base.total_efficiency - 1.0).abs() < 1e-9);
        let scale = n / PulseSet::default().signal.energy;
        prop_assert!((r.retrieved_counts / (scale * base.retrieved_counts) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn memory_is_passive_and_ledger_balances(
        coop in 0.0f64..6000.0,
        delta in -24.0f64..-4.0,
        energy in 0.0f64..0.6,
        storage in 6.0f64..60.0,
        zeta_rt in 0.0f64..0.2,
        il in 0.0f64..0.9,
    ) {
        let c = MemoryConfig {
            cooperativity: coop,
            intermediate_detuning_ghz: delta,
            insertion_loss: il,
            cavity: CavityParams { zeta_rt, ..CavityParams::default() },
            ..MemoryConfig::default()
        };
        let p = PulseSet::default().with_write_energy(energy).with_storage_time(storage);
        let r = simulate_storage_retrieval(&c, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.internal_efficiency), "{}", r.internal_efficiency);
        prop_assert!((0.0..=1.0).contains(&r.total_efficiency), "{}", r.total_efficiency);
        let l = r.ledger;
        prop_assert!(l.imbalance() < 1e-6 * l.input, "{l:?}");
        for v in [l.leaked, l.retrieved, l.scattered, l.spin_decayed, l.dephased, l.residual] {
            prop_assert!(v >= -1e-9 * l.input);
        }
        prop_assert!(r.retrieved_counts >= 0.0 && r.background_counts >= 0.0);
        prop_assert!(r.output_flux.iter().chain(&r.reference_flux).all(|&f| f >= 0.0));
    }
}

#[test]
fn operating_point() {
    let r = simulate_storage_retrieval(&MemoryConfig::default(), &PulseSet::default()).unwrap();
    assert!((r.internal_efficiency - 0.84).abs() < 0.02, "{}", r.internal_efficiency);
    assert!((r.total_efficiency - 0.27).abs() < 0.01, "{}", r.total_efficiency);
    assert!((r.snr_db - 28.5).abs() < 1.0, "{}", r.snr_db);
    assert_eq!(r.storage_time_ns, 12.5);
    let direct = total_efficiency(r.retrieved_counts, r.reference_counts, 0.68).unwrap();
    assert!((direct - r.total_efficiency).abs() < 1e-15);
}

#[test]
fn without_atoms_everything_leaks() {
    let c = MemoryConfig { cooperativity: 0.0, cavity: CavityParams { zeta_rt: 0.0, ..CavityParams::default() }, ..lossless() };
    let r = simulate_storage_retrieval(&c, &PulseSet::default()).unwrap();
    let l = r.ledger;
    assert!((l.leaked / l.input - 1.0).abs() < 1e-6, "{l:?}");
    assert!(r.internal_efficiency < 1e-9);
}

#[test]
fn no_control_no_recall() {
    let p = PulseSet::default().with_write_energy(0.0);
    assert_eq!(p.read.energy, 0.0);
    let r = simulate_storage_retrieval(&MemoryConfig::default(), &p).unwrap();
    assert_eq!(r.retrieved_counts, 0.0);
    assert_eq!(r.internal_efficiency, 0.0);
    assert_eq!(r.total_efficiency, 0.0);
}

#[test]
fn fast_spin_decay_erases_memory() {
    let c = MemoryConfig { spin_decay_mhz: 500.0, ..MemoryConfig::default() };
    let r = simulate_storage_retrieval(&c, &PulseSet::default()).unwrap();
    assert!(r.internal_efficiency < 1e-6, "{}", r.internal_efficiency);
}

#[test]
fn empty_signal_is_rejected() {
    let mut p = PulseSet::default();
    p.signal.energy = 0.0;
    assert!(matches!(simulate_storage_retrieval(&MemoryConfig::default(), &p), Err(Error::Domain(_))));
    // read overlapping write
    let p = PulseSet::default().with_storage_time(3.0);
    assert!(matches!(simulate_storage_retrieval(&MemoryConfig::default(), &p), Err(Error::Domain(_))));
}

#[test]
fn runs_are_deterministic() {
    let a = simulate_storage_retrieval(&MemoryConfig::default(), &PulseSet::default()).unwrap();
    let b = simulate_storage_retrieval(&MemoryConfig::default(), &PulseSet::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn step_halving_converges() {
    let c = MemoryConfig { check_convergence: true, ..MemoryConfig::default() };
    let r = simulate_storage_retrieval(&c, &PulseSet::default()).unwrap();
    assert!(r.convergence_delta.unwrap() < 1e-3);
    let coarse = simulate_storage_retrieval(&MemoryConfig { dt_ns: 0.02, ..MemoryConfig::default() }, &PulseSet::default())
        .unwrap();
    assert!((coarse.internal_efficiency / r.internal_efficiency - 1.0).abs() < 1e-3);
}

#[test]
fn insertion_loss_scales_total_only() {
    let a = simulate_storage_retrieval(&lossless(), &PulseSet::default()).unwrap();
    let b = simulate_storage_retrieval(&MemoryConfig::default(), &PulseSet::default()).unwrap();
    assert_eq!(a.internal_efficiency, b.internal_efficiency);
    assert!((b.total_efficiency / a.total_efficiency - 0.32).abs() < 1e-12);
}

#[test]
fn efficiency_identities() {
    assert!((total_efficiency(0.84, 1.0, 0.68).unwrap() - 0.2688).abs() < 1e-12);
    assert_eq!(total_efficiency(0.0, 3.0, 0.68).unwrap(), 0.0);
    assert_eq!(total_efficiency(2.0, 4.0, 0.0).unwrap(), 0.5);
    assert!(total_efficiency(1.0, 0.0, 0.5).is_err());
    assert!(total_efficiency(1.0, 1.0, 1.0).is_err());
    assert!((snr(100.0, 1.0).unwrap() - 20.0).abs() < 1e-12);
    assert_eq!(snr(1.0, 0.0).unwrap(), f64::INFINITY);
    assert!(snr(-1.0, 1.0).is_err());
}

#[test]
fn kernel_reproduces_lifetime_model() {
    let p = DecayParams::default();
    let gm = std::f64::consts::TAU * p.spin_decay_mhz * 1e-3;
    for k in 0..200 {
        let t = k as f64 * 0.5;
        let k2 = dephasing_kernel(t, &p).norm_sqr() * (-gm * t).exp();
        let m = lifetime_model(t, &p) / (p.a + p.b).powi(2);
        assert!((k2 - m).abs() < 1e-12, "{t}");
    }
    let tau = envelope_lifetime(&p).unwrap();
    assert!((decay_envelope(tau, &p) - (-1.0f64).exp()).abs() < 1e-9);
}

#[test]
fn lifetime_scan_matches_single_runs_and_decays() {
    let c = MemoryConfig::default();
    let p = PulseSet::default();
    let times = [8.0, 12.5, 30.0, 60.0, 100.0];
    let scan = lifetime_scan(&c, &p, &times).unwrap();
    for (pt, &t) in scan.iter().zip(&times) {
        let r = simulate_storage_retrieval(&c, &p.with_storage_time(t)).unwrap();
        assert_eq!(pt.internal_efficiency, r.internal_efficiency);
    }
    assert!(scan[4].internal_efficiency < 0.1 * scan[1].internal_efficiency);
    assert!(lifetime_scan(&c, &p, &[1.0]).is_err());
}

#[test]
fn trace_has_control_pulses_where_expected() {
    let p = PulseSet::default();
    let t = amplitude_trace(&MemoryConfig::default(), &p).unwrap();
    let peak = |v: &[num_complex::Complex64]| {
        let (i, _) = v.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        t.time_grid_ns[i]
    };
    assert!((peak(&t.write_rabi) - p.write.center_ns).abs() < 0.02);
    assert!((peak(&t.read_rabi) - p.read.center_ns).abs() < 0.02);
    // the spin wave holds the excitation between the pulses
    let mid = t.time_grid_ns.iter().position(|&x| x >= p.write.center_ns + 6.0).unwrap();
    assert!(t.spin[mid].norm() > 10.0 * t.field[mid].norm());
}

#[test]
fn narrower_cavity_costs_bandwidth() {
    // with half the cavity linewidth a short signal no longer fits
    let mut p = PulseSet::default();
    p.signal.fwhm_ns = 0.6;
    let wide = simulate_storage_retrieval(&MemoryConfig::default(), &p).unwrap();
    let narrow_cavity = CavityParams { r1: 0.78, ..CavityParams::default() };
    let c = MemoryConfig { cavity: narrow_cavity, ..MemoryConfig::default() };
    assert!(c.kappa().unwrap() < 0.6 * MemoryConfig::default().kappa().unwrap());
    let narrow = simulate_storage_retrieval(&c, &p).unwrap();
    assert!(narrow.internal_efficiency < wide.internal_efficiency);
}
