//! The four concrete fits: cavity reflection, Doppler absorption, storage
//! lifetime and a single Gaussian line.

use std::f64::consts::{LN_2, PI};

use rustfft::{num_complex::Complex64, FftPlanner};

use super::engine::{fit_curve, FitResult};
use crate::atomic::{LadderSpectroscopy, ManifoldSpec, Polarization};
use crate::cavity::{self, CavityParams};
use crate::error::{Error, Result};
use crate::memory::{envelope_lifetime, lifetime_model, DecayParams};
use crate::vapour::one_photon_spectrum_with;

const OPEN: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

/// Detection threshold, in standard errors, for a beat or line amplitude.
/// High because the fit is free to place the feature on the largest noise
/// excursion.
pub const SIGNIFICANCE: f64 = 5.0;

fn check_columns(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::structural("x and y columns differ in length"));
    }
    if x.len() < min {
        return Err(Error::domain(format!("need at least {min} data points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("data contain non-finite values"));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("x values must be strictly increasing"));
    }
    Ok(())
}

/// Linear resampling of `(x, y)` onto `n` uniform points.
fn resample(x: &[f64], y: &[f64], n: usize) -> (f64, Vec<f64>) {
    let (x0, x1) = (x[0], x[x.len() - 1]);
    let dx = (x1 - x0) / (n - 1) as f64;
    let mut k = 0;
    let ys = (0..n)
        .map(|i| {
            let t = x0 + dx * i as f64;
            while k + 2 < x.len() && x[k + 1] < t {
                k += 1;
            }
            let w = ((t - x[k]) / (x[k + 1] - x[k])).clamp(0.0, 1.0);
            y[k] + w * (y[k + 1] - y[k])
        })
        .collect();
    (dx, ys)
}

/// Strongest spectral peak of a real uniformly sampled signal above
/// `f_min`, refined by zero padding and parabolic interpolation. Returns
/// (frequency, single-sided amplitude).
pub fn spectral_peak(samples: &[f64], dx: f64, f_min: f64) -> Option<(f64, f64)> {
    let n = samples.len();
    if n < 4 {
        return None;
    }
    let padded = (16 * n).next_power_of_two().max(8192);
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(padded, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let df = 1.0 / (padded as f64 * dx);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm()).collect();
    let start = ((f_min / df).ceil() as usize).max(1);
    let (k, _) = mag
        .iter()
        .enumerate()
        .skip(start)
        .take(padded / 2 - start - 1)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Some(((k as f64 + shift) * df, 2.0 * b / n as f64))
}

// ---------------------------------------------------------------- cavity

/// Reflected power of a cavity resonance comb centred at `center_ghz`,
/// times a detection scale.
pub fn cavity_reflection_model(detunings_ghz: &[f64], r1: f64, r2: f64, p: &[f64]) -> Result<Vec<f64>> {
    let (fsr, zeta, amplitude, center) = (p[0], p[1], p[2], p[3]);
    let cav = CavityParams { r1, r2, zeta_rt: zeta, fsr_ghz: fsr, ..CavityParams::default() };
    cav.validate()?;
    Ok(detunings_ghz.iter().map(|&d| amplitude * cav.reflection_amplitude(d - center).norm_sqr()).collect())
}

// on-resonance over anti-resonance reflected power
fn dip_contrast(r1: f64, r2: f64, zeta: f64) -> f64 {
    let cav = CavityParams { r1, r2, zeta_rt: zeta, fsr_ghz: 1.0, ..CavityParams::default() };
    cav.reflection_amplitude(0.0).norm_sqr() / cav.reflection_amplitude(0.5).norm_sqr()
}

/// FSR from the autocorrelation of the mean-removed data: the first
/// maximum after the correlation has gone negative.
fn fsr_from_autocorrelation(dx: f64, y: &[f64]) -> Option<f64> {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let v: Vec<f64> = y.iter().map(|a| a - mean).collect();
    let corr = |lag: usize| -> f64 { (0..n - lag).map(|i| v[i] * v[i + lag]).sum::<f64>() / (n - lag) as f64 };
    let max_lag = n * 9 / 10;
    let mut went_negative = false;
    let mut prev = corr(0);
    let mut best: Option<(usize, f64)> = None;
    for lag in 1..max_lag {
        let c = corr(lag);
        if c < 0.0 {
            went_negative = true;
        }
        if went_negative && c > 0.0 {
            match best {
                Some((_, b)) if c <= b => {
                    if c < prev {
                        break;
                    }
                }
                _ => best = Some((lag, c)),
            }
        }
        prev = c;
    }
    best.map(|(lag, _)| lag as f64 * dx)
}

/// Fits `[fsr_ghz, zeta_rt, amplitude, center_ghz]` to reflected power with
/// the mirror reflectivities fixed.
///
/// Initial values: FSR from the autocorrelation peak, centre at the deepest
/// point, loss from the dip contrast on the over-coupled branch
/// (`zeta_rt` below critical coupling), amplitude from the maximum.
pub fn fit_cavity_reflection(detunings_ghz: &[f64], power: &[f64], r1: f64, r2: f64) -> Result<FitResult> {
    check_columns(detunings_ghz, power, 8)?;
    let probe = CavityParams { r1, r2, ..CavityParams::default() };
    probe.validate()?;
    let n = detunings_ghz.len();
    let (dx, uniform) = resample(detunings_ghz, power, n.max(64));
    let span = detunings_ghz[n - 1] - detunings_ghz[0];
    let fsr0 = fsr_from_autocorrelation(dx, &uniform).unwrap_or(span);
    let imin = (0..n).min_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap_or(0);
    let center0 = detunings_ghz[imin];
    let ymax = power.iter().cloned().fold(f64::MIN, f64::max);
    let contrast = (power[imin] / ymax).clamp(0.0, 1.0);
    // critical coupling: sqrt(R2 (1 - zeta)) = sqrt(R1)
    let critical = (1.0 - r1 / r2).clamp(0.0, 0.999);
    let (mut lo, mut hi) = (0.0, critical);
    if dip_contrast(r1, r2, 0.0) > contrast {
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if dip_contrast(r1, r2, m) > contrast {
                lo = m;
            } else {
                hi = m;
            }
        }
    }
    let zeta0 = 0.5 * (lo + hi);
    let cav0 = CavityParams { zeta_rt: zeta0, fsr_ghz: 1.0, ..probe };
    let amp0 = ymax / cav0.reflection_amplitude(0.5).norm_sqr();

    let mut r = fit_curve(
        |x, p| cavity_reflection_model(x, r1, r2, p),
        detunings_ghz,
        power,
        &["fsr_ghz", "zeta_rt", "amplitude", "center_ghz"],
        &[fsr0, zeta0, amp0, center0],
        &[(1e-3, f64::INFINITY), (0.0, 0.999), (0.0, f64::INFINITY), OPEN],
    )?;
    let fitted = CavityParams { r1, r2, zeta_rt: r.parameters[1], fsr_ghz: r.parameters[0], ..CavityParams::default() };
    let s = cavity::summarize(&fitted)?;
    r.derived.insert("finesse".into(), s.finesse);
    r.derived.insert("linewidth_ghz".into(), s.linewidth_ghz);
    r.derived.insert("insertion_loss".into(), s.insertion_loss);
    r.derived.insert("insertion_loss_db".into(), s.insertion_loss_db);
    Ok(r)
}

// ---------------------------------------------------------------- doppler

/// One-photon transmission on the first ladder step at field `p[0]`,
/// shifted by `p[1]` (GHz), with optical depth `p[2]`.
pub fn doppler_absorption_model(
    ladder: &[ManifoldSpec; 3],
    pol: Polarization,
    doppler_fwhm_ghz: f64,
    detunings_ghz: &[f64],
    p: &[f64],
) -> Result<Vec<f64>> {
    let spec = LadderSpectroscopy::new(ladder, p[0])?;
    let shifted: Vec<f64> = detunings_ghz.iter().map(|d| d - p[1]).collect();
    one_photon_spectrum_with(&spec, p[2], doppler_fwhm_ghz, pol, &shifted)
}

/// Upper end of the field search.
pub const DOPPLER_FIT_MAX_FIELD_MT: f64 = 400.0;
const DOPPLER_INIT_STEP_MT: f64 = 5.0;

/// Fits `[field_mt, offset_ghz, depth]` to a one-photon transmission
/// spectrum with the Doppler width and line strengths fixed by theory.
///
/// Initial field: the grid point (5 mT steps) whose predicted spectrum,
/// aligned on the absorption-weighted centroid and scaled to the same
/// integrated optical depth, matches the data best.
pub fn fit_doppler_absorption(
    ladder: &[ManifoldSpec; 3],
    pol: Polarization,
    doppler_fwhm_ghz: f64,
    detunings_ghz: &[f64],
    transmission: &[f64],
) -> Result<FitResult> {
    check_columns(detunings_ghz, transmission, 8)?;
    // absorption-weighted centroid and area of a spectrum; noisy saturated
    // points can dip below zero, hence the floor
    let moments = |t: &[f64]| -> (f64, f64) {
        let od: Vec<f64> = t.iter().map(|v| -v.clamp(1e-3, 1.0).ln()).collect();
        let area: f64 = od.iter().sum();
        let c = od.iter().zip(detunings_ghz).map(|(w, x)| w * x).sum::<f64>() / area.max(f64::MIN_POSITIVE);
        (c, area)
    };
    let (data_c, data_area) = moments(transmission);

    let mut best: Option<(f64, [f64; 3])> = None;
    let steps = (DOPPLER_FIT_MAX_FIELD_MT / DOPPLER_INIT_STEP_MT) as usize;
    for k in 0..=steps {
        let b = k as f64 * DOPPLER_INIT_STEP_MT;
        let unit = doppler_absorption_model(ladder, pol, doppler_fwhm_ghz, detunings_ghz, &[b, 0.0, 1.0])?;
        let (model_c, model_area) = moments(&unit);
        if !(model_area > 0.0) {
            continue;
        }
        let p = [b, data_c - model_c, data_area / model_area];
        let m = doppler_absorption_model(ladder, pol, doppler_fwhm_ghz, detunings_ghz, &p)?;
        let cost: f64 = m.iter().zip(transmission).map(|(a, b)| (a - b).powi(2)).sum();
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, p));
        }
    }
    let (_, init) = best.ok_or_else(|| Error::domain("data window contains no absorption lines"))?;
    fit_curve(
        |x, p| doppler_absorption_model(ladder, pol, doppler_fwhm_ghz, x, p),
        detunings_ghz,
        transmission,
        &["field_mt", "offset_ghz", "depth"],
        &init,
        &[(0.0, DOPPLER_FIT_MAX_FIELD_MT), OPEN, (0.0, f64::INFINITY)],
    )
}

// ---------------------------------------------------------------- lifetime

fn decay_from(p: &[f64], spin_decay_mhz: f64) -> DecayParams {
    DecayParams { spin_decay_mhz, dephasing_width_mhz: p[0], line_splitting_mhz: p[1], a: p[2], b: p[3] }
}

/// Fits `[nu_prime_mhz, omega_mhz, a, b]` of the decay model with the spin
/// decay fixed. `omega_mhz` is `omega / 2 pi`.
///
/// Initial values: a quadratic fit of `ln eta + gamma_m t` against `t^2`
/// gives `nu'` and the mean level; the beat frequency is the FFT peak of
/// the data divided by that envelope and the peak height gives `B / A`.
/// If `B` is not at least [`SIGNIFICANCE`] standard errors above zero the
/// beat frequency is reported unidentifiable.
pub fn fit_lifetime(times_ns: &[f64], efficiency: &[f64], spin_decay_mhz: f64) -> Result<FitResult> {
    check_columns(times_ns, efficiency, 8)?;
    if !(spin_decay_mhz >= 0.0) {
        return Err(Error::domain("spin decay must be >= 0"));
    }
    let gm = std::f64::consts::TAU * spin_decay_mhz * 1e-3;
    // ln(eta) + gm t = c0 - c1 t^2
    let pts: Vec<(f64, f64)> = times_ns
        .iter()
        .zip(efficiency)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&t, &e)| (t * t, e.ln() + gm * t))
        .collect();
    if pts.len() < 3 {
        return Err(Error::domain("too few positive efficiencies to initialise the fit"));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let c1 = if sxx > 0.0 { (-sxy / sxx).max(0.0) } else { 0.0 };
    let c0 = my + c1 * mx;
    let nu0 = (4.0 * LN_2 * c1).sqrt() / PI * 1e3;
    let level = c0.exp();

    let n = times_ns.len();
    let ratio: Vec<f64> = times_ns
        .iter()
        .zip(efficiency)
        .map(|(&t, &e)| e / (c0 - gm * t - c1 * t * t).exp() - 1.0)
        .collect();
    let (dt, uniform) = resample(times_ns, &ratio, n);
    let span = times_ns[n - 1] - times_ns[0];
    let (f_peak, amp) = spectral_peak(&uniform, dt, 2.0 / span).unwrap_or((0.0, 0.0));
    let q = (amp / 2.0).min(0.5);
    let a0 = (level / (1.0 + q * q)).sqrt();
    let init = [nu0.max(1e-3), f_peak * 1e3, a0, q * a0];

    let model = |x: &[f64], p: &[f64]| -> Result<Vec<f64>> {
        let d = decay_from(p, spin_decay_mhz);
        Ok(x.iter().map(|&t| lifetime_model(t, &d)).collect())
    };
    let mut r = fit_curve(
        model,
        times_ns,
        efficiency,
        &["nu_prime_mhz", "omega_mhz", "a", "b"],
        &init,
        &[(0.0, f64::INFINITY), (0.0, f64::INFINITY), (0.0, f64::INFINITY), (0.0, f64::INFINITY)],
    )?;
    let b = r.parameters[3];
    let sb = r.uncertainties[3];
    if !(b > SIGNIFICANCE * sb) && r.is_identifiable("omega_mhz") {
        r.unidentifiable.push("omega_mhz".into());
        r.uncertainties[1] = f64::INFINITY;
    }
    let d = decay_from(&r.parameters, spin_decay_mhz);
    r.derived.insert("eta0".into(), lifetime_model(0.0, &d));
    if let Ok(t) = envelope_lifetime(&d) {
        r.derived.insert("one_over_e_ns".into(), t);
    }
    Ok(r)
}

// ---------------------------------------------------------------- line

/// `offset - depth exp(-4 ln2 (x - center)^2 / fwhm^2)`.
pub fn gaussian_line_model(x: &[f64], p: &[f64]) -> Vec<f64> {
    let (c, w, d, o) = (p[0], p[1], p[2], p[3]);
    x.iter().map(|&v| o - d * (-4.0 * LN_2 * ((v - c) / w).powi(2)).exp()).collect()
}

/// Fits `[center, fwhm, depth, offset]` of a single Gaussian dip (units of
/// x). Initial values: centre at the minimum, offset at the maximum, width
/// from the half-depth crossings. A depth below [`SIGNIFICANCE`] standard
/// errors leaves centre and width unidentifiable.
pub fn fit_gaussian_line(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_columns(x, y, 6)?;
    let n = x.len();
    let imin = (0..n).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let mut edges: Vec<f64> = y[..n / 10 + 1].iter().chain(&y[n - n / 10 - 1..]).cloned().collect();
    edges.sort_by(f64::total_cmp);
    let offset0 = edges[edges.len() / 2];
    let depth0 = (offset0 - y[imin]).max(0.0);
    let half = offset0 - depth0 / 2.0;
    let left = (0..imin).rev().find(|&i| y[i] > half).map_or(x[0], |i| x[i]);
    let right = (imin..n).find(|&i| y[i] > half).map_or(x[n - 1], |i| x[i]);
    let span = x[n - 1] - x[0];
    let w0 = (right - left).clamp(span / n as f64, span);
    let mut r = fit_curve(
        |x, p| Ok(gaussian_line_model(x, p)),
        x,
        y,
        &["center", "fwhm", "depth", "offset"],
        &[x[imin], w0, depth0, offset0],
        &[OPEN, (1e-9 * span, f64::INFINITY), (0.0, f64::INFINITY), OPEN],
    )?;
    let (d, sd) = (r.parameters[2], r.uncertainties[2]);
    if !(d > SIGNIFICANCE * sd) {
        for (k, name) in [(0, "center"), (1, "fwhm")] {
            if r.is_identifiable(name) {
                r.unidentifiable.push(name.into());
            }
            r.uncertainties[k] = f64::INFINITY;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_peak_finds_sine() {
        let dx = 0.25;
        let s: Vec<f64> = (0..400).map(|k| (std::f64::consts::TAU * 0.171 * k as f64 * dx).cos() * 0.3).collect();
        let (f, a) = spectral_peak(&s, dx, 0.02).unwrap();
        assert!((f - 0.171).abs() < 2e-4, "{f}");
        assert!((a - 0.3).abs() < 0.03, "{a}");
    }

    #[test]
    fn resample_identity_on_uniform() {
        let x: Vec<f64> = (0..11).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let (dx, r) = resample(&x, &y, 11);
        assert_eq!(dx, 1.0);
        for (a, b) in r.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
