//! Linear two-mirror cavity: reflection and transmission response, finesse,
//! linewidth, insertion loss, cooperativity and the signal/control
//! dual-resonance map.
//!
//! Frequencies are in GHz. Detunings `delta_s` (signal) and `delta_c`
//! (control) are measured from the respective atomic line centroids.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Deserialize<'de>, CavityParams<T>: Default"))]
pub struct CavityParams<T = f64> {
    /// In-coupler power reflectivity.
    pub r1: T,
    /// End-mirror power reflectivity.
    pub r2: T,
    /// Round-trip excess power loss.
    pub zeta_rt: T,
    pub fsr_ghz: T,
    /// Resonance shift per degree of cell temperature.
    pub tuning_ghz_per_c: T,
    /// Signal detuning of one cavity resonance at the reference temperature.
    pub mode_offset_signal_ghz: T,
    /// Control detuning of one cavity resonance at the reference temperature.
    pub mode_offset_control_ghz: T,
}

impl Default for CavityParams<f64> {
    fn default() -> Self {
        CavityParams {
            r1: 0.6,
            r2: 0.9998,
            zeta_rt: 0.135,
            fsr_ghz: 8.3,
            tuning_ghz_per_c: 3.2,
            mode_offset_signal_ghz: -8.0,
            mode_offset_control_ghz: 8.0,
        }
    }
}

impl<T: Real> CavityParams<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.r1) || !unit(self.r2) {
            return Err(Error::domain("mirror reflectivities must lie in [0, 1]"));
        }
        if !(self.zeta_rt >= T::zero() && self.zeta_rt < T::one()) {
            return Err(Error::domain("round-trip loss must lie in [0, 1)"));
        }
        if !(self.fsr_ghz > T::zero()) || !self.fsr_ghz.is_finite() {
            return Err(Error::domain("free spectral range must be positive"));
        }
        Ok(())
    }

    /// Single-pass amplitude factor of the end mirror plus round-trip loss,
    /// `sqrt(R2 (1 - zeta_rt))`.
    fn return_amplitude(&self) -> T {
        (self.r2 * (T::one() - self.zeta_rt)).sqrt()
    }

    /// Round-trip amplitude `r = sqrt(R1 R2 (1 - zeta_rt))`.
    pub fn round_trip_amplitude(&self) -> T {
        self.r1.sqrt() * self.return_amplitude()
    }

    fn phase(&self, detuning_ghz: T) -> Complex<T> {
        Complex::from_polar(T::one(), T::TAU() * detuning_ghz / self.fsr_ghz)
    }

    /// Complex reflection amplitude at detuning `d` from a resonance.
    pub fn reflection_amplitude(&self, detuning_ghz: T) -> Complex<T> {
        let e = self.phase(detuning_ghz);
        let g = self.return_amplitude();
        let num = e * ((T::one() - self.r1) * g);
        let den = Complex::new(T::one(), T::zero()) - e * self.round_trip_amplitude();
        Complex::new(self.r1.sqrt(), T::zero()) - num / den
    }

    /// Complex transmission amplitude through the end mirror, with the
    /// round-trip loss split evenly between the two half passes.
    pub fn transmission_amplitude(&self, detuning_ghz: T) -> Complex<T> {
        let half = Complex::from_polar(T::one(), T::PI() * detuning_ghz / self.fsr_ghz);
        let pass = ((T::one() - self.r1) * (T::one() - self.r2)).sqrt()
            * (T::one() - self.zeta_rt).sqrt().sqrt();
        let den = Complex::new(T::one(), T::zero())
            - self.phase(detuning_ghz) * self.round_trip_amplitude();
        half * pass / den
    }

    /// Circulating intra-cavity power per unit input power.
    pub fn buildup(&self, detuning_ghz: T) -> T {
        let den = Complex::new(T::one(), T::zero())
            - self.phase(detuning_ghz) * self.round_trip_amplitude();
        (T::one() - self.r1) / den.norm_sqr()
    }

    /// Distance from `detuning_ghz` to the nearest resonance of a comb that
    /// has one tooth at `offset_ghz`, wrapped into `(-fsr/2, fsr/2]`.
    pub fn wrap_to_mode(&self, detuning_ghz: T, offset_ghz: T) -> T {
        let f = self.fsr_ghz;
        let x = detuning_ghz - offset_ghz;
        let mut w = x - (x / f).round() * f;
        if w <= -f / T::lit(2.0) {
            w = w + f;
        }
        w
    }
}

/// Sampled frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityResponse<T = f64> {
    pub detunings_ghz: Vec<T>,
    pub reflection: Vec<Complex<T>>,
    pub transmission: Vec<Complex<T>>,
}

impl<T: Real> CavityResponse<T> {
    pub fn reflected_power(&self) -> Vec<T> {
        self.reflection.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn transmitted_power(&self) -> Vec<T> {
        self.transmission.iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn reflection_response<T: Real>(
    params: &CavityParams<T>,
    detunings_ghz: &[T],
) -> Result<CavityResponse<T>> {
    params.validate()?;
    Ok(CavityResponse {
        detunings_ghz: detunings_ghz.to_vec(),
        reflection: detunings_ghz
            .iter()
            .map(|&d| params.reflection_amplitude(d))
            .collect(),
        transmission: detunings_ghz
            .iter()
            .map(|&d| params.transmission_amplitude(d))
            .collect(),
    })
}

/// `pi sqrt(r) / (1 - r)` with `r` the round-trip amplitude.
pub fn finesse<T: Real>(params: &CavityParams<T>) -> Result<T> {
    params.validate()?;
    let r = params.round_trip_amplitude();
    if r >= T::one() {
        return Err(Error::domain(
            "round-trip amplitude must be below 1 for a finite finesse",
        ));
    }
    Ok(T::PI() * r.sqrt() / (T::one() - r))
}

/// Cavity linewidth (FWHM, GHz).
pub fn linewidth<T: Real>(params: &CavityParams<T>) -> Result<T> {
    Ok(params.fsr_ghz / finesse(params)?)
}

/// Fraction of on-resonance signal power not returned by the cavity.
pub fn insertion_loss<T: Real>(params: &CavityParams<T>) -> Result<T> {
    params.validate()?;
    Ok(T::one() - params.reflection_amplitude(T::zero()).norm_sqr())
}

/// Insertion loss expressed as returned power in dB (negative).
pub fn insertion_loss_db<T: Real>(params: &CavityParams<T>) -> Result<T> {
    let zeta = insertion_loss(params)?;
    Ok(T::lit(10.0) * (T::one() - zeta).log10())
}

/// `C = 2 d F`.
pub fn cooperativity<T: Real>(optical_depth: T, finesse: T) -> Result<T> {
    if optical_depth < T::zero() || !(finesse > T::zero()) {
        return Err(Error::domain("cooperativity needs d >= 0 and finesse > 0"));
    }
    Ok(T::lit(2.0) * optical_depth * finesse)
}

/// Resonance shift (GHz) for a cell temperature change; signal and control
/// resonances move together.
pub fn temperature_shift<T: Real>(delta_t_c: T, params: &CavityParams<T>) -> T {
    params.tuning_ghz_per_c * delta_t_c
}

/// Signal/control detuning pair where both fields are resonant and the
/// two-photon condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualResonance<T = f64> {
    pub signal_detuning_ghz: T,
    pub control_detuning_ghz: T,
    /// Product of the two buildup factors at this pair.
    pub buildup_product: T,
    /// Control mismatch from its nearest resonance (GHz).
    pub control_mismatch_ghz: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualResonanceMap<T = f64> {
    pub signal_grid_ghz: Vec<T>,
    pub control_grid_ghz: Vec<T>,
    /// `values[i][j]`: buildup product at `(signal_grid[i], control_grid[j])`.
    pub values: Vec<Vec<T>>,
    /// Signal resonances inside the signal grid, evaluated on the
    /// two-photon line `delta_c = -delta_s`, sorted by signal detuning.
    pub pairs: Vec<DualResonance<T>>,
    pub shift_ghz: T,
}

/// The two-photon line, `delta_c = -delta_s`, within `tol_ghz`.
pub fn on_two_photon_line<T: Real>(signal_ghz: T, control_ghz: T, tol_ghz: T) -> bool {
    (signal_ghz + control_ghz).abs() <= tol_ghz
}

/// Buildup product over a detuning grid. `shift_ghz` translates both
/// resonance combs (temperature tuning).
pub fn dual_resonance_map<T: Real>(
    params: &CavityParams<T>,
    signal_grid_ghz: &[T],
    control_grid_ghz: &[T],
    shift_ghz: T,
) -> Result<DualResonanceMap<T>> {
    params.validate()?;
    if signal_grid_ghz.is_empty() || control_grid_ghz.is_empty() {
        return Err(Error::domain("dual-resonance grids must be non-empty"));
    }
    let s0 = params.mode_offset_signal_ghz + shift_ghz;
    let c0 = params.mode_offset_control_ghz + shift_ghz;
    let bs: Vec<T> = signal_grid_ghz
        .iter()
        .map(|&d| params.buildup(d - s0))
        .collect();
    let bc: Vec<T> = control_grid_ghz
        .iter()
        .map(|&d| params.buildup(d - c0))
        .collect();
    let values = bs
        .iter()
        .map(|&a| bc.iter().map(|&b| a * b).collect())
        .collect();

    let (lo, hi) = signal_grid_ghz
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    let f = params.fsr_ghz;
    let kmin = ((lo - s0) / f).ceil().to_i64().unwrap_or(0);
    let kmax = ((hi - s0) / f).floor().to_i64().unwrap_or(-1);
    let mut pairs = Vec::new();
    for k in kmin..=kmax {
        let ds = s0 + T::from_i64(k).unwrap_or_else(T::zero) * f;
        let dc = -ds;
        pairs.push(DualResonance {
            signal_detuning_ghz: ds,
            control_detuning_ghz: dc,
            buildup_product: params.buildup(T::zero()) * params.buildup(dc - c0),
            control_mismatch_ghz: params.wrap_to_mode(dc, c0),
        });
    }
    Ok(DualResonanceMap {
        signal_grid_ghz: signal_grid_ghz.to_vec(),
        control_grid_ghz: control_grid_ghz.to_vec(),
        values,
        pairs,
        shift_ghz,
    })
}

impl<T: Real> DualResonanceMap<T> {
    /// Pairs whose control mismatch is within `tol_ghz`.
    pub fn resonant_pairs(&self, tol_ghz: T) -> Vec<DualResonance<T>> {
        self.pairs
            .iter()
            .copied()
            .filter(|p| p.control_mismatch_ghz.abs() <= tol_ghz)
            .collect()
    }
}

/// Summary numbers of a cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySummary {
    pub finesse: f64,
    pub linewidth_ghz: f64,
    pub insertion_loss: f64,
    pub insertion_loss_db: f64,
    pub round_trip_amplitude: f64,
    pub on_resonance_buildup: f64,
}

pub fn summarize(params: &CavityParams<f64>) -> Result<CavitySummary> {
    Ok(CavitySummary {
        finesse: finesse(params)?,
        linewidth_ghz: linewidth(params)?,
        insertion_loss: insertion_loss(params)?,
        insertion_loss_db: insertion_loss_db(params)?,
        round_trip_amplitude: params.round_trip_amplitude(),
        on_resonance_buildup: params.buildup(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_single_port_reflects_everything() {
        let p = CavityParams {
            r2: 1.0,
            zeta_rt: 0.0,
            ..CavityParams::default()
        };
        for d in [-3.0, 0.0, 0.1, 2.0] {
            assert!((p.reflection_amplitude(d).norm() - 1.0).abs() < 1e-12);
        }
        assert!(insertion_loss(&p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn f32_and_f64_agree() {
        let p64 = CavityParams::default();
        let p32 = CavityParams::<f32> {
            r1: 0.6,
            r2: 0.9998,
            zeta_rt: 0.135,
            fsr_ghz: 8.3,
            tuning_ghz_per_c: 3.2,
            mode_offset_signal_ghz: -8.0,
            mode_offset_control_ghz: 8.0,
        };
        let a = finesse(&p64).unwrap();
        let b = finesse(&p32).unwrap() as f64;
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn wrap_stays_in_half_open_interval() {
        let p = CavityParams::default();
        for x in [-20.0, -4.15, 0.0, 4.15, 4.16, 13.0] {
            let w = p.wrap_to_mode(x, 0.3);
            assert!(w > -4.15 - 1e-12 && w <= 4.15 + 1e-12, "{x} -> {w}");
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = CavityParams {
            r1: 1.2,
            ..CavityParams::default()
        };
        assert!(matches!(finesse(&p), Err(Error::Domain(_))));
        let p = CavityParams {
            r1: 1.0,
            r2: 1.0,
            zeta_rt: 0.0,
            ..CavityParams::default()
        };
        assert!(matches!(finesse(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn temperature_shift_is_linear() {
        let p = CavityParams::default();
        assert!((temperature_shift(1.0, &p) - 3.2).abs() < 1e-12);
        assert!((temperature_shift(0.1, &p) - 0.32).abs() < 1e-12);
        assert_eq!(temperature_shift(0.0, &p), 0.0);
    }
}
