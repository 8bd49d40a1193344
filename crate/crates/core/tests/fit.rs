use ladder_memory::fit::{
    fit_cavity_reflection, fit_curve, fit_gaussian_line, fit_lifetime, gaussian_line_model, least_squares,
    numeric_jacobian, spectral_peak, Problem,
};
use ladder_memory::memory::{lifetime_model, DecayParams};
use ladder_memory::{Error, Result};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const OPEN: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

fn noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn quadratic(x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    Ok(x.iter().map(|v| p[0] + p[1] * v + p[2] * v * v).collect())
}

#[test]
fn quadratic_matches_normal_equations() {
    let xs: Vec<f64> = (0..60).map(|k| -3.0 + k as f64 * 0.1).collect();
    let truth = [0.7, -1.2, 0.35];
    let sd = 0.05;
    let ys: Vec<f64> = quadratic(&xs, &truth).unwrap().iter().zip(noise(60, sd, 7)).map(|(a, b)| a + b).collect();
    let r = fit_curve(quadratic, &xs, &ys, &["a", "b", "c"], &[0.0, 0.0, 0.0], &[OPEN; 3]).unwrap();
    assert!(r.converged && !r.singular);

    // closed-form linear least squares
    let a = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
    let y = DVector::from_vec(ys.clone());
    let ata = a.transpose() * &a;
    let exact = ata.clone().lu().solve(&(a.transpose() * &y)).unwrap();
    let resid = &y - &a * &exact;
    let s2 = resid.norm_squared() / (xs.len() - 3) as f64;
    let cov = ata.try_inverse().unwrap() * s2;
    for k in 0..3 {
        assert!((r.parameters[k] - exact[k]).abs() < 1e-6, "{k}");
        assert!((r.uncertainties[k] / cov[(k, k)].sqrt() - 1.0).abs() < 1e-3, "{k}");
        assert!((r.parameters[k] - truth[k]).abs() < 3.0 * r.uncertainties[k], "{k}");
    }
    assert!((r.residual_norm - resid.norm_squared()).abs() < 1e-9);
}

#[test]
fn linear_data_fit_exactly() {
    let xs: Vec<f64> = (0..25).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 4.0 - 0.25 * x).collect();
    let r = fit_curve(
        |x, p| Ok(x.iter().map(|v| p[0] + p[1] * v).collect()),
        &xs,
        &ys,
        &["a", "b"],
        &[0.0, 1.0],
        &[OPEN; 2],
    )
    .unwrap();
    // noiseless data: recovery to the step tolerance
    assert!((r.get("a").unwrap() - 4.0).abs() < 1e-8, "{r:?}");
    assert!((r.get("b").unwrap() + 0.25).abs() < 1e-8);
    assert!(r.get("zz").is_err());

    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
    let r = fit_curve(|x, p| Ok(x.iter().map(|v| p[0] * v).collect()), &xs, &ys, &["a"], &[0.5], &[OPEN]).unwrap();
    assert!((r.parameters[0] - 2.0).abs() < 1e-10);
}

#[test]
fn bounds_are_respected() {
    let xs: Vec<f64> = (0..20).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| -2.0 * x).collect();
    let r = fit_curve(
        |x, p| Ok(x.iter().map(|v| p[0] * v).collect()),
        &xs,
        &ys,
        &["a"],
        &[1.0],
        &[(0.0, 5.0)],
    )
    .unwrap();
    assert!(r.parameters[0] >= 0.0 && r.parameters[0] < 1e-6, "{:?}", r.parameters);
    // initial value outside the bounds
    let bad = fit_curve(|x, p| Ok(x.iter().map(|v| p[0] * v).collect()), &xs, &ys, &["a"], &[9.0], &[(0.0, 5.0)]);
    assert!(matches!(bad, Err(Error::Domain(_))));
}

#[test]
fn mismatched_problem_is_structural() {
    let p = Problem {
        names: vec!["a".into(), "b".into()],
        initial: vec![1.0],
        bounds: vec![OPEN],
        residuals: Box::new(|p: &[f64]| Ok(vec![p[0], p[0]])),
    };
    assert!(matches!(least_squares(&p), Err(Error::Structural(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jacobian_matches_analytic(a in -3.0f64..3.0, b in 0.1f64..4.0, c in -2.0f64..2.0) {
        let xs: Vec<f64> = (0..15).map(|k| k as f64 * 0.2).collect();
        let f = |p: &[f64]| -> Result<Vec<f64>> { Ok(xs.iter().map(|x| p[0] * (-x / p[1]).exp() + p[2] * x).collect()) };
        let j = numeric_jacobian(&f, &[a, b, c], &[OPEN; 3]).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let e = (-x / b).exp();
            let exact = [e, a * x / (b * b) * e, *x];
            for k in 0..3 {
                prop_assert!((j[(i, k)] - exact[k]).abs() <= 1e-7 * exact[k].abs().max(1.0), "{i} {k}");
            }
        }
    }

    #[test]
    fn ssr_history_never_rises(c in 1.0f64..3.0, w in 0.1f64..0.6, d in 0.2f64..0.9, seed in 0u64..1000) {
        let xs: Vec<f64> = (0..200).map(|k| k as f64 * 0.02).collect();
        let y: Vec<f64> = gaussian_line_model(&xs, &[c, w, d, 1.0]).iter().zip(noise(200, 0.01, seed)).map(|(a, b)| a + b).collect();
        let r = fit_gaussian_line(&xs, &y).unwrap();
        prop_assert!(r.history.windows(2).all(|h| h[1] <= h[0]));
        prop_assert_eq!(*r.history.last().unwrap(), r.residual_norm);
        prop_assert!((r.get("center").unwrap() - c).abs() < 5.0 * r.uncertainty("center").unwrap().max(1e-6));
    }
}

#[test]
fn lifetime_without_beat_leaves_frequency_unidentified() {
    let truth = DecayParams { b: 0.0, ..DecayParams::default() };
    let ts: Vec<f64> = (0..=180).map(|k| 10.0 + k as f64 * 0.5).collect();
    let ys: Vec<f64> = ts
        .iter()
        .zip(noise(ts.len(), 0.02, 11))
        .map(|(&t, n)| lifetime_model(t, &truth) * (1.0 + n))
        .collect();
    let r = fit_lifetime(&ts, &ys, truth.spin_decay_mhz).unwrap();
    assert!(!r.is_identifiable("omega_mhz"), "{r:?}");
    assert_eq!(r.uncertainty("omega_mhz").unwrap(), f64::INFINITY);
    assert!(r.is_identifiable("nu_prime_mhz"));
    assert!((r.get("nu_prime_mhz").unwrap() - 12.6).abs() < 5.0 * r.uncertainty("nu_prime_mhz").unwrap());
}

#[test]
fn lifetime_with_beat_recovers_frequency() {
    let truth = DecayParams::default();
    let ts: Vec<f64> = (0..=180).map(|k| 10.0 + k as f64 * 0.5).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| lifetime_model(t, &truth)).collect();
    let r = fit_lifetime(&ts, &ys, truth.spin_decay_mhz).unwrap();
    assert!(r.is_identifiable("omega_mhz"));
    assert!((r.get("omega_mhz").unwrap() - 171.0).abs() < 1e-4, "{r:?}");
    assert!((r.get("b").unwrap() - 0.038).abs() < 1e-6);
    assert!((r.derived["eta0"] - 0.548f64.powi(2)).abs() < 1e-6);
}

#[test]
fn flat_line_has_no_center() {
    let xs: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
    let ys: Vec<f64> = noise(100, 0.01, 3).iter().map(|n| 1.0 + n).collect();
    let r = fit_gaussian_line(&xs, &ys).unwrap();
    assert!(!r.is_identifiable("center") && !r.is_identifiable("fwhm"));
}

#[test]
fn cavity_fit_from_both_sides_of_critical_coupling() {
    let xs: Vec<f64> = (0..=2000).map(|k| -10.0 + k as f64 * 0.01).collect();
    // default mirrors are critically coupled near zeta 0.4; take one point
    // on each side
    for zeta in [0.135, 0.6] {
        let truth = [8.3, zeta, 1.0, 0.4];
        let y = ladder_memory::fit::cavity_reflection_model(&xs, 0.6, 0.9998, &truth).unwrap();
        let r = fit_cavity_reflection(&xs, &y, 0.6, 0.9998).unwrap();
        for (p, t) in r.parameters.iter().zip(&truth).take(3) {
            assert!((p - t).abs() < 1e-5, "{zeta}: {:?}", r.parameters);
        }
        // any resonance of the comb will do
        let off = (r.parameters[3] - truth[3]) / truth[0];
        assert!((off - off.round()).abs() * truth[0] < 1e-5, "{zeta}: {:?}", r.parameters);
        assert!(r.derived["finesse"] > 0.0);
    }
}

#[test]
fn spectral_peak_of_sampled_cosine() {
    let dx = 0.05;
    let y: Vec<f64> = (0..400).map(|k| 0.3 * (std::f64::consts::TAU * 0.171 * k as f64 * dx).cos()).collect();
    let (f, a) = spectral_peak(&y, dx, 0.05).unwrap();
    assert!((f - 0.171).abs() < 0.005, "{f}");
    assert!((a - 0.3).abs() < 0.03, "{a}");
}
