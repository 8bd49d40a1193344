//! Thermal vapour optics: Doppler widths, optical depth, one- and
//! two-photon absorption spectra, residual-Doppler dephasing.

use serde::{Deserialize, Serialize};

use crate::atomic::{LadderSpectroscopy, Polarization};
use crate::constants::AtomData;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
const ZERO_CELSIUS: f64 = 273.15;

/// Depth calibration: 200 at 85 C over a 6 mm path.
pub const REFERENCE_DEPTH: f64 = 200.0;
pub const REFERENCE_TEMPERATURE_C: f64 = 85.0;
pub const REFERENCE_LENGTH_MM: f64 = 6.0;
pub const DEPTH_MODEL_RANGE_C: (f64, f64) = (20.0, 150.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    CoPropagating,
    CounterPropagating,
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "co" | "co-propagating" => Ok(Geometry::CoPropagating),
            "counter" | "counter-propagating" => Ok(Geometry::CounterPropagating),
            other => Err(Error::domain(format!("unknown beam geometry '{other}'"))),
        }
    }
}

/// A coherence time that may be unbounded (perfect Doppler cancellation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifetime {
    Finite(f64),
    Unbounded,
}

impl Lifetime {
    pub fn as_ns(self) -> f64 {
        match self {
            Lifetime::Finite(t) => t,
            Lifetime::Unbounded => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VapourParams {
    pub temperature_c: f64,
    pub cell_length_mm: f64,
    /// Overrides the vapour-pressure model when set.
    pub optical_depth: Option<f64>,
    /// Gaussian FWHM of the field-inhomogeneity broadening of two-photon lines.
    pub field_inhomogeneity_mhz: f64,
}

impl Default for VapourParams {
    fn default() -> Self {
        VapourParams {
            temperature_c: REFERENCE_TEMPERATURE_C,
            cell_length_mm: REFERENCE_LENGTH_MM,
            optical_depth: None,
            field_inhomogeneity_mhz: DEFAULT_FIELD_INHOMOGENEITY_MHZ,
        }
    }
}

/// `sqrt(12.6^2 - 3.02^2)`: the observed 12.6 MHz dephasing width with the
/// counter-propagating residual Doppler width at 85 C removed.
pub const DEFAULT_FIELD_INHOMOGENEITY_MHZ: f64 = 12.233;

impl VapourParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_c > -ZERO_CELSIUS) {
            return Err(Error::domain("temperature must be above absolute zero"));
        }
        if !(self.cell_length_mm > 0.0) {
            return Err(Error::domain("cell length must be positive"));
        }
        if self.optical_depth.is_some_and(|d| !(d >= 0.0)) {
            return Err(Error::domain("optical depth must be >= 0"));
        }
        if !(self.field_inhomogeneity_mhz >= 0.0) {
            return Err(Error::domain("field inhomogeneity must be >= 0"));
        }
        Ok(())
    }

    /// Line-centre single-pass depth, from the override or the model.
    pub fn depth(&self, data: &AtomData) -> Result<f64> {
        self.validate()?;
        match self.optical_depth {
            Some(d) => Ok(d),
            None => optical_depth(data, self.temperature_c, self.cell_length_mm),
        }
    }

    /// Doppler FWHM of the signal transition in rad/s.
    pub fn doppler_width(&self, data: &AtomData) -> f64 {
        doppler_width(
            self.temperature_c,
            data.optics.signal_wavelength_nm,
            data.species.mass_u,
        )
    }

    /// Doppler FWHM of the signal transition in GHz.
    pub fn doppler_width_ghz(&self, data: &AtomData) -> f64 {
        rad_per_s_to_ghz(self.doppler_width(data))
    }
}

/// One-dimensional thermal velocity spread `sqrt(k T / m)` in m/s.
pub fn thermal_velocity_sd<T: Real>(temperature_c: T, mass_u: T) -> T {
    let tk = (temperature_c + T::lit(ZERO_CELSIUS)).max(T::zero());
    (T::lit(BOLTZMANN) * tk / (mass_u * T::lit(ATOMIC_MASS_UNIT))).sqrt()
}

/// Gaussian Doppler FWHM (rad/s) `(2 pi / lambda) sqrt(8 ln2 k T / m)`.
pub fn doppler_width<T: Real>(temperature_c: T, wavelength_nm: T, mass_u: T) -> T {
    let k = T::TAU() / (wavelength_nm * T::lit(1e-9));
    k * (T::lit(8.0) * T::LN_2()).sqrt() * thermal_velocity_sd(temperature_c, mass_u)
}

/// Converts an angular frequency (rad/s) to GHz.
pub fn rad_per_s_to_ghz<T: Real>(w: T) -> T {
    w / T::TAU() * T::lit(1e-9)
}

fn number_density(data: &AtomData, temperature_c: f64) -> f64 {
    let tk = temperature_c + ZERO_CELSIUS;
    data.vapour_pressure.pressure_torr(tk) / tk
}

/// Line-centre single-pass depth from the vapour-pressure curve, scaled so
/// that 85 C over 6 mm gives 200.
pub fn optical_depth(data: &AtomData, temperature_c: f64, length_mm: f64) -> Result<f64> {
    let (lo, hi) = DEPTH_MODEL_RANGE_C;
    if !(temperature_c >= lo && temperature_c <= hi) {
        return Err(Error::domain(format!(
            "optical depth model valid for {lo}..{hi} C, got {temperature_c} C"
        )));
    }
    if !(length_mm > 0.0) {
        return Err(Error::domain("cell length must be positive"));
    }
    let ratio = number_density(data, temperature_c) / number_density(data, REFERENCE_TEMPERATURE_C);
    Ok(REFERENCE_DEPTH * ratio * length_mm / REFERENCE_LENGTH_MM)
}

/// Gaussian with unit peak and the given FWHM.
pub fn gaussian_unit_peak<T: Real>(x: T, fwhm: T) -> T {
    let a = T::lit(4.0) * T::LN_2() / (fwhm * fwhm);
    (-a * x * x).exp()
}

/// Signal transmission over a detuning grid (GHz, from the 5S-5P centroid).
///
/// Ground sublevels are equally populated; each line's weight is its
/// strength relative to the strongest line of the pair, so an isolated unit
/// line has centre depth `d`.
pub fn one_photon_spectrum(
    data: &AtomData,
    vapour: &VapourParams,
    b_mt: f64,
    pol: Polarization,
    grid_ghz: &[f64],
) -> Result<Vec<f64>> {
    let spec = LadderSpectroscopy::new(&data.ladder()?, b_mt)?;
    one_photon_spectrum_with(
        &spec,
        vapour.depth(data)?,
        rad_per_s_to_ghz(vapour.doppler_width(data)),
        pol,
        grid_ghz,
    )
}

/// As [`one_photon_spectrum`] with precomputed levels, depth and Doppler
/// FWHM (GHz).
pub fn one_photon_spectrum_with(
    spec: &LadderSpectroscopy,
    depth: f64,
    doppler_fwhm_ghz: f64,
    pol: Polarization,
    grid_ghz: &[f64],
) -> Result<Vec<f64>> {
    if !(doppler_fwhm_ghz > 0.0) {
        return Err(Error::domain("Doppler width must be positive"));
    }
    let lines = spec.one_photon_lines(0, pol);
    Ok(grid_ghz
        .iter()
        .map(|&x| {
            let od: f64 = lines
                .iter()
                .map(|l| l.strength * gaussian_unit_peak(x - l.detuning_ghz, doppler_fwhm_ghz))
                .sum();
            (-depth * od).exp()
        })
        .collect())
}

/// Gaussian FWHM contributions (MHz) of a two-photon line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonWidth {
    pub doppler_mhz: f64,
    pub natural_mhz: f64,
    pub field_mhz: f64,
    pub total_mhz: f64,
}

/// Width of a two-photon line: residual (or full) Doppler, natural width of
/// the doubly excited level and field inhomogeneity added in quadrature.
pub fn two_photon_linewidth(
    data: &AtomData,
    vapour: &VapourParams,
    geometry: Geometry,
) -> Result<TwoPhotonWidth> {
    vapour.validate()?;
    let sv = thermal_velocity_sd(vapour.temperature_c, data.species.mass_u);
    let dk = wavevector_mismatch(
        data.optics.signal_wavelength_nm,
        data.optics.control_wavelength_nm,
        geometry,
    );
    let doppler_mhz =
        dk * sv * (8.0 * std::f64::consts::LN_2).sqrt() / std::f64::consts::TAU * 1e-6;
    let natural_mhz = data.natural_linewidth_mhz("5D5/2")?;
    let field_mhz = vapour.field_inhomogeneity_mhz;
    let total_mhz = (doppler_mhz.powi(2) + natural_mhz.powi(2) + field_mhz.powi(2)).sqrt();
    Ok(TwoPhotonWidth {
        doppler_mhz,
        natural_mhz,
        field_mhz,
        total_mhz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonSpectrum {
    pub control_detuning_ghz: Vec<f64>,
    pub transmission: Vec<f64>,
    /// Resonance positions (two-photon detuning, GHz) and relative strengths.
    pub lines: Vec<(f64, f64)>,
    pub width: TwoPhotonWidth,
    /// Set when the signal sits within one Doppler width of a one-photon
    /// line, where linear absorption dominates.
    pub linear_absorption_warning: bool,
}

/// Signal transmission while scanning the control detuning.
///
/// `control_depth` is the peak two-photon depth of the strongest resonance
/// in the spectrum and scales with control power; 0 gives a flat line.
#[allow(clippy::too_many_arguments)]
pub fn two_photon_spectrum(
    data: &AtomData,
    spec: &LadderSpectroscopy,
    vapour: &VapourParams,
    signal_pol: Polarization,
    control_pol: Polarization,
    signal_detuning_ghz: f64,
    control_grid_ghz: &[f64],
    geometry: Geometry,
    control_depth: f64,
) -> Result<TwoPhotonSpectrum> {
    if !(control_depth >= 0.0) {
        return Err(Error::domain("control depth must be >= 0"));
    }
    let width = two_photon_linewidth(data, vapour, geometry)?;
    let res = spec.resonances(
        signal_pol,
        control_pol,
        (f64::NEG_INFINITY, f64::INFINITY),
        Some(signal_detuning_ghz),
    );
    let smax = res.iter().map(|r| r.strength).fold(0.0, f64::max);
    let lines: Vec<(f64, f64)> = res
        .iter()
        .map(|r| {
            (
                r.detuning_ghz,
                if smax > 0.0 { r.strength / smax } else { 0.0 },
            )
        })
        .collect();
    let fwhm_ghz = width.total_mhz * 1e-3;
    let transmission = control_grid_ghz
        .iter()
        .map(|&dc| {
            let total = signal_detuning_ghz + dc;
            let od: f64 = lines
                .iter()
                .map(|&(p, s)| s * gaussian_unit_peak(total - p, fwhm_ghz))
                .sum();
            (-control_depth * od).exp()
        })
        .collect();
    let doppler_ghz = rad_per_s_to_ghz(vapour.doppler_width(data));
    let linear_absorption_warning = spec
        .one_photon_lines(0, signal_pol)
        .iter()
        .any(|l| (l.detuning_ghz - signal_detuning_ghz).abs() < doppler_ghz);
    Ok(TwoPhotonSpectrum {
        control_detuning_ghz: control_grid_ghz.to_vec(),
        transmission,
        lines,
        width,
        linear_absorption_warning,
    })
}

/// `|k_s -/+ k_c|` in 1/m.
pub fn wavevector_mismatch<T: Real>(signal_nm: T, control_nm: T, geometry: Geometry) -> T {
    let ks = T::TAU() / (signal_nm * T::lit(1e-9));
    let kc = T::TAU() / (control_nm * T::lit(1e-9));
    match geometry {
        Geometry::CounterPropagating => (ks - kc).abs(),
        Geometry::CoPropagating => ks + kc,
    }
}

/// 1/e spin-wave coherence time `1 / (dk sigma_v)` in ns.
pub fn residual_doppler_lifetime<T: Real>(
    temperature_c: T,
    signal_nm: T,
    control_nm: T,
    mass_u: T,
    geometry: Geometry,
) -> Lifetime {
    let dk = wavevector_mismatch(signal_nm, control_nm, geometry);
    let rate = dk * thermal_velocity_sd(temperature_c, mass_u);
    if rate <= T::zero() {
        Lifetime::Unbounded
    } else {
        Lifetime::Finite((T::lit(1e9) / rate).to_f64_lossy())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doppler_width_at_operating_point() {
        let w = doppler_width(85.0f64, 780.0, 86.909);
        let ghz = rad_per_s_to_ghz(w);
        assert!((ghz - 0.55).abs() / 0.55 < 0.03, "{ghz}");
    }

    #[test]
    fn zero_kelvin_has_no_width() {
        assert_eq!(doppler_width(-273.15f64, 780.0, 87.0), 0.0);
    }

    #[test]
    fn equal_wavelengths_unbounded() {
        let l = residual_doppler_lifetime(85.0f64, 780.0, 780.0, 87.0, Geometry::CounterPropagating);
        assert_eq!(l, Lifetime::Unbounded);
    }

    #[test]
    fn depth_reference_and_range() {
        let data = AtomData::builtin();
        assert!((optical_depth(&data, 85.0, 6.0).unwrap() - 200.0).abs() < 1e-9);
        assert!(matches!(
            optical_depth(&data, 10.0, 6.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn default_two_photon_width_matches_observed_band() {
        let data = AtomData::builtin();
        let w = two_photon_linewidth(
            &data,
            &VapourParams::default(),
            Geometry::CounterPropagating,
        )
        .unwrap();
        assert!((w.doppler_mhz - 3.02).abs() < 0.05, "{w:?}");
        assert!((w.total_mhz - 12.6).abs() < 0.1, "{w:?}");
    }
}
