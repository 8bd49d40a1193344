use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{amplitude_trace, simulate_storage_retrieval, MemoryConfig, PulseSet, SimulationResult};
use crate::atomic::{LadderSpectroscopy, ManifoldSpec};
use crate::error::{Error, Result};
use crate::optimize::nelder_mead;

/// One point of a parameter scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Scanned value (storage time in ns, write energy in nJ, ...).
    pub x: f64,
    pub internal_efficiency: f64,
    pub total_efficiency: f64,
    pub retrieved_counts: f64,
    pub reference_counts: f64,
    pub snr_db: f64,
}

impl ScanPoint {
    fn from_result(x: f64, r: &SimulationResult) -> Self {
        ScanPoint {
            x,
            internal_efficiency: r.internal_efficiency,
            total_efficiency: r.total_efficiency,
            retrieved_counts: r.retrieved_counts,
            reference_counts: r.reference_counts,
            snr_db: r.snr_db,
        }
    }
}

fn scan<F>(config: &MemoryConfig, xs: &[f64], make: F) -> Result<Vec<ScanPoint>>
where
    F: Fn(f64) -> PulseSet + Sync,
{
    xs.par_iter()
        .map(|&x| simulate_storage_retrieval(config, &make(x)).map(|r| ScanPoint::from_result(x, &r)))
        .collect()
}

/// Efficiency against storage time; the read pulse moves, everything else
/// stays put.
pub fn lifetime_scan(config: &MemoryConfig, pulses: &PulseSet, storage_times_ns: &[f64]) -> Result<Vec<ScanPoint>> {
    let min = pulses.write.fwhm_ns + pulses.read.fwhm_ns;
    if let Some(t) = storage_times_ns.iter().find(|&&t| !(t >= min)) {
        return Err(Error::domain(format!(
            "storage time {t} ns is shorter than the minimum pulse separation {min} ns"
        )));
    }
    scan(config, storage_times_ns, |t| pulses.with_storage_time(t))
}

/// Efficiency against write energy at a fixed read/write energy ratio.
pub fn energy_scan(config: &MemoryConfig, pulses: &PulseSet, write_energies_nj: &[f64]) -> Result<Vec<ScanPoint>> {
    if write_energies_nj.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::domain("write energies must be >= 0"));
    }
    if pulses.write.energy <= 0.0 {
        return Err(Error::domain("energy scan needs a nonzero reference write energy to fix the read/write ratio"));
    }
    scan(config, write_energies_nj, |e| pulses.with_write_energy(e))
}

/// The control parameters re-optimised per point of a bandwidth scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSettings {
    /// Write centre relative to the signal centre.
    pub write_delay_ns: f64,
    pub write_fwhm_ns: f64,
    pub read_fwhm_ns: f64,
    pub write_energy_nj: f64,
    pub read_write_ratio: f64,
    pub two_photon_detuning_ghz: f64,
}

const MIN_FWHM_NS: f64 = 0.2;
const MAX_READ_WRITE_RATIO: f64 = 3.0;

impl ControlSettings {
    pub fn from_pulses(p: &PulseSet) -> Self {
        ControlSettings {
            write_delay_ns: p.write.center_ns - p.signal.center_ns,
            write_fwhm_ns: p.write.fwhm_ns,
            read_fwhm_ns: p.read.fwhm_ns,
            write_energy_nj: p.write.energy,
            read_write_ratio: if p.write.energy > 0.0 { p.read.energy / p.write.energy } else { 1.0 },
            two_photon_detuning_ghz: p.write.carrier_detuning_ghz,
        }
    }

    /// Applies the settings, keeping the storage time of `p`.
    pub fn apply(&self, p: &PulseSet) -> PulseSet {
        let storage = p.storage_time_ns();
        let mut q = *p;
        q.write.center_ns = p.signal.center_ns + self.write_delay_ns;
        q.write.fwhm_ns = self.write_fwhm_ns;
        q.write.energy = self.write_energy_nj;
        q.write.carrier_detuning_ghz = self.two_photon_detuning_ghz;
        q.read.fwhm_ns = self.read_fwhm_ns;
        q.read.energy = self.write_energy_nj * self.read_write_ratio;
        q.read.carrier_detuning_ghz = self.two_photon_detuning_ghz;
        q.with_storage_time(storage)
    }

    fn to_vec(self) -> [f64; 6] {
        [
            self.write_delay_ns,
            self.write_fwhm_ns,
            self.read_fwhm_ns,
            self.write_energy_nj.sqrt(),
            self.read_write_ratio,
            self.two_photon_detuning_ghz,
        ]
    }

    // search coordinates are unconstrained; bounds are imposed here. The
    // write pulse has to overlap the signal, so its delay is capped at the
    // sum of the two widths.
    fn from_vec(x: &[f64], signal_fwhm_ns: f64) -> Self {
        let write_fwhm_ns = x[1].abs().max(MIN_FWHM_NS);
        let max_delay = signal_fwhm_ns + write_fwhm_ns;
        ControlSettings {
            write_delay_ns: x[0].clamp(-max_delay, max_delay),
            write_fwhm_ns,
            read_fwhm_ns: x[2].abs().max(MIN_FWHM_NS),
            write_energy_nj: x[3] * x[3],
            read_write_ratio: x[4].clamp(0.0, MAX_READ_WRITE_RATIO),
            two_photon_detuning_ghz: x[5],
        }
    }
}

/// Maximises `C_ret / C_ref` over the control settings by Nelder-Mead,
/// starting from the controls in `pulses`. Infeasible trial points (for
/// example read and write overlapping) score zero.
pub fn optimize_controls(
    config: &MemoryConfig,
    pulses: &PulseSet,
    max_evaluations: usize,
) -> Result<(ControlSettings, SimulationResult)> {
    let start = ControlSettings::from_pulses(pulses);
    let objective = |x: &[f64]| {
        let p = ControlSettings::from_vec(x, pulses.signal.fwhm_ns).apply(pulses);
        simulate_storage_retrieval(config, &p).map_or(0.0, |r| -r.count_ratio())
    };
    let scale = [0.3, 0.3, 0.5, 0.1, 0.3, 0.01];
    let m = nelder_mead(objective, &start.to_vec(), &scale, 1e-7, max_evaluations);
    let best = ControlSettings::from_vec(&m.x, pulses.signal.fwhm_ns);
    let result = simulate_storage_retrieval(config, &best.apply(pulses))?;
    Ok((best, result))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub signal_fwhm_ns: f64,
    pub internal_efficiency: f64,
    pub total_efficiency: f64,
    pub settings: ControlSettings,
}

/// Efficiency against signal FWHM with the controls re-optimised at every
/// point. The write pulse starts at its default offset from the signal.
pub fn bandwidth_scan(
    config: &MemoryConfig,
    pulses: &PulseSet,
    signal_fwhms_ns: &[f64],
    max_evaluations: usize,
) -> Result<Vec<BandwidthPoint>> {
    if signal_fwhms_ns.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::domain("signal widths must be positive"));
    }
    signal_fwhms_ns
        .par_iter()
        .map(|&w| {
            let mut p = *pulses;
            p.signal.fwhm_ns = w;
            let (settings, r) = optimize_controls(config, &p, max_evaluations)?;
            Ok(BandwidthPoint {
                signal_fwhm_ns: w,
                internal_efficiency: r.internal_efficiency,
                total_efficiency: r.total_efficiency,
                settings,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    pub field_mt: f64,
    /// Second line minus memory line.
    pub line_separation_mhz: f64,
    /// Strength of the second line over the memory line.
    pub bare_ratio: f64,
    pub write_weight: f64,
    pub read_weight: f64,
    /// `B / A` of the beat.
    pub ratio: f64,
}

/// Relative spectral weight `|F(f)| / |F(0)|` of a sampled complex signal.
fn spectral_weight(times: &[f64], x: &[Complex64], f_ghz: f64) -> f64 {
    let w = std::f64::consts::TAU * f_ghz;
    let mut at = Complex64::new(0.0, 0.0);
    let mut dc = Complex64::new(0.0, 0.0);
    for (t, v) in times.iter().zip(x) {
        at += v * Complex64::from_polar(1.0, w * t);
        dc += v;
    }
    if dc.norm() == 0.0 {
        return 0.0;
    }
    at.norm() / dc.norm()
}

/// Beat amplitude ratio `B / A` for a second line at `separation_ghz` with
/// bare strength ratio `bare_ratio`. Returns `(write_weight, read_weight,
/// ratio)`.
///
/// Writing excites the second line through the spectral component of the
/// spin-wave source `Omega_w* a` at the line separation. On readout each
/// component emits at its own Raman frequency, so the read pulse does not
/// filter, but the emission offset by the separation is attenuated by the
/// cavity's Lorentzian amplitude response.
pub fn suppression_for_separation(
    config: &MemoryConfig,
    pulses: &PulseSet,
    separation_ghz: f64,
    bare_ratio: f64,
) -> Result<(f64, f64, f64)> {
    let tr = amplitude_trace(config, pulses)?;
    let write_src: Vec<Complex64> = tr.field.iter().zip(&tr.write_rabi).map(|(a, o)| a * o.conj()).collect();
    let ww = spectral_weight(&tr.time_grid_ns, &write_src, separation_ghz);
    let kappa_ghz = config.kappa()? / std::f64::consts::TAU;
    let wr = 1.0 / (1.0 + (2.0 * separation_ghz / kappa_ghz).powi(2)).sqrt();
    Ok((ww, wr, bare_ratio * ww * wr))
}

/// Lines weaker than this fraction of the memory line do not count as the
/// second line.
pub const SECOND_LINE_MIN_RELATIVE: f64 = 0.1;
const SECOND_LINE_SEARCH_GHZ: f64 = 3.0;

/// Beat amplitude ratio at a given field: the second line is the nearest
/// (sigma-, sigma-) resonance holding at least
/// [`SECOND_LINE_MIN_RELATIVE`] of the memory line strength.
pub fn oscillation_suppression(
    ladder: &[ManifoldSpec; 3],
    field_mt: f64,
    config: &MemoryConfig,
    pulses: &PulseSet,
) -> Result<SuppressionReport> {
    if !(field_mt > 0.0) {
        return Err(Error::domain("field must be positive"));
    }
    let spec = LadderSpectroscopy::new(ladder, field_mt)?;
    let mem = spec.memory_line()?;
    let second = spec
        .addressable_lines(SECOND_LINE_SEARCH_GHZ, SECOND_LINE_MIN_RELATIVE)?
        .into_iter()
        .filter(|r| (r.ground, r.doubly_excited) != (mem.ground, mem.doubly_excited))
        .min_by(|a, b| {
            (a.detuning_ghz - mem.detuning_ghz)
                .abs()
                .total_cmp(&(b.detuning_ghz - mem.detuning_ghz).abs())
        })
        .ok_or_else(|| Error::domain(format!("no second line within {SECOND_LINE_SEARCH_GHZ} GHz at {field_mt} mT")))?;
    let sep = second.detuning_ghz - mem.detuning_ghz;
    let bare = second.strength / mem.strength;
    let (ww, wr, ratio) = suppression_for_separation(config, pulses, sep, bare)?;
    Ok(SuppressionReport {
        field_mt,
        line_separation_mhz: sep * 1e3,
        bare_ratio: bare,
        write_weight: ww,
        read_weight: wr,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_lines_keep_bare_ratio() {
        let cfg = MemoryConfig { dt_ns: 0.01, ..MemoryConfig::default() };
        let (_, _, r) = suppression_for_separation(&cfg, &PulseSet::default(), 0.0, 0.3).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn controls_round_trip() {
        let p = PulseSet::default();
        let q = ControlSettings::from_pulses(&p).apply(&p);
        for (a, b) in [(p.write, q.write), (p.read, q.read)] {
            assert!((a.center_ns - b.center_ns).abs() < 1e-12);
            assert!((a.energy - b.energy).abs() < 1e-12);
            assert_eq!(a.fwhm_ns, b.fwhm_ns);
        }
    }
}
