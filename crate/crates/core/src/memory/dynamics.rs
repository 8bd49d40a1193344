use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{dephasing_kernel, snr, MemoryConfig, PulseSet, PulseShape};
use crate::error::{Error, Result};
use crate::ode::{integrate, steps_for};

/// Where the input photons went, in photons at the memory (before
/// insertion loss).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhotonLedger {
    pub input: f64,
    pub leaked: f64,
    pub retrieved: f64,
    /// Spontaneous emission from the intermediate polarization.
    pub scattered: f64,
    /// Decay of the doubly excited level during storage.
    pub spin_decayed: f64,
    /// Removed by the dephasing kernel.
    pub dephased: f64,
    /// Still in the cavity, polarization or spin wave at the end.
    pub residual: f64,
}

impl PhotonLedger {
    /// `|input - sum of channels|`.
    pub fn imbalance(&self) -> f64 {
        (self.input - self.leaked - self.retrieved - self.scattered - self.spin_decayed - self.dephased - self.residual)
            .abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub time_grid_ns: Vec<f64>,
    /// Output photon flux at the memory (photons/ns) with the control on.
    pub output_flux: Vec<f64>,
    /// Output flux of the control-off reference pulse.
    pub reference_flux: Vec<f64>,
    /// Reference counts after insertion loss.
    pub reference_counts: f64,
    /// Leaked counts after insertion loss.
    pub leak_counts: f64,
    /// Retrieved counts after insertion loss, background subtracted.
    pub retrieved_counts: f64,
    /// Counts of the reference run in the retrieval window, subtracted from
    /// the retrieved counts.
    pub background_counts: f64,
    /// Retrieved photons over input photons, lossless cavity.
    pub internal_efficiency: f64,
    /// `C_ret / (C_ref / (1 - zeta))`.
    pub total_efficiency: f64,
    pub snr_db: f64,
    pub ledger: PhotonLedger,
    pub leak_window_end_ns: f64,
    pub storage_time_ns: f64,
    /// Relative change of the internal efficiency on halving the step, when
    /// the convergence check ran.
    pub convergence_delta: Option<f64>,
}

impl SimulationResult {
    /// `C_ret / C_ref`, the optimisation objective.
    pub fn count_ratio(&self) -> f64 {
        if self.reference_counts > 0.0 {
            self.retrieved_counts / self.reference_counts
        } else {
            0.0
        }
    }
}

/// Slowly varying drive terms, precomputed per pulse.
#[derive(Clone)]
struct Drive {
    signal: PulseShape,
    signal_amp: f64,
    controls: [(PulseShape, f64); 2],
    /// Control carrier offsets relative to the write carrier (rad/ns).
    control_offsets: [f64; 2],
    signal_offset: f64,
}

impl Drive {
    fn a_in(&self, t: f64) -> Complex64 {
        let s = &self.signal;
        let phase = s.phase_rad - self.signal_offset * (t - s.center_ns);
        Complex64::from_polar(self.signal_amp * s.envelope(t), phase)
    }

    fn omega(&self, t: f64) -> Complex64 {
        let mut o = Complex64::new(0.0, 0.0);
        for ((p, peak), off) in self.controls.iter().zip(&self.control_offsets) {
            if *peak == 0.0 {
                continue;
            }
            o += Complex64::from_polar(peak * p.envelope(t), p.phase_rad - off * (t - p.center_ns));
        }
        o
    }
}

struct Rates {
    kappa: f64,
    g: f64,
    delta: f64,
    gamma: f64,
    gamma_m: f64,
    cavity_detuning: f64,
    two_photon: f64,
}

// state layout: a, P, S as (re, im) pairs, then cumulative input, output,
// scattered and spin-decayed photons
const N: usize = 10;

fn c(y: &[f64; N], k: usize) -> Complex64 {
    Complex64::new(y[2 * k], y[2 * k + 1])
}

fn rhs(r: &Rates, d: &Drive, t: f64, y: &[f64; N]) -> [f64; N] {
    let i = Complex64::i();
    let (a, p, s) = (c(y, 0), c(y, 1), c(y, 2));
    let ain = d.a_in(t);
    let om = d.omega(t);
    let sk = r.kappa.sqrt();
    let da = (i * r.cavity_detuning - r.kappa / 2.0) * a + i * r.g * p + sk * ain;
    let dp = (i * r.delta - r.gamma / 2.0) * p + i * r.g * a + i * om * s;
    let ds = (i * r.two_photon - r.gamma_m / 2.0) * s + i * om.conj() * p;
    let aout = ain - sk * a;
    [
        da.re,
        da.im,
        dp.re,
        dp.im,
        ds.re,
        ds.im,
        ain.norm_sqr(),
        aout.norm_sqr(),
        r.gamma * p.norm_sqr(),
        r.gamma_m * s.norm_sqr(),
    ]
}

struct Window {
    t0: f64,
    t_mid: f64,
    t1: f64,
}

struct RunOutput {
    times: Vec<f64>,
    flux: Vec<f64>,
    field: Vec<Complex64>,
    spin: Vec<Complex64>,
    ledger: PhotonLedger,
}

const SAMPLE_SPACING_NS: f64 = 0.01;

struct Sampler<'a> {
    drive: &'a Drive,
    sqrt_kappa: f64,
    every: usize,
    count: usize,
    skip_first: bool,
    times: Vec<f64>,
    flux: Vec<f64>,
    field: Vec<Complex64>,
    spin: Vec<Complex64>,
}

impl Sampler<'_> {
    fn observe(&mut self, t: f64, y: &[f64; N]) {
        if self.skip_first {
            self.skip_first = false;
            return;
        }
        if self.count.is_multiple_of(self.every) {
            let aout = self.drive.a_in(t) - self.sqrt_kappa * c(y, 0);
            self.times.push(t);
            self.flux.push(aout.norm_sqr());
            self.field.push(c(y, 0));
            self.spin.push(c(y, 2));
        }
        self.count += 1;
    }
}

fn run(rates: &Rates, drive: &Drive, win: &Window, dt: f64, kernel: Complex64) -> Result<RunOutput> {
    let mut f = |t: f64, y: &[f64; N]| rhs(rates, drive, t, y);
    let mut sampler = Sampler {
        drive,
        sqrt_kappa: rates.kappa.sqrt(),
        every: ((SAMPLE_SPACING_NS / dt).round() as usize).max(1),
        count: 0,
        skip_first: false,
        times: Vec::new(),
        flux: Vec::new(),
        field: Vec::new(),
        spin: Vec::new(),
    };

    let n1 = steps_for(win.t_mid - win.t0, dt);
    let mut y = integrate(&mut f, [0.0; N], win.t0, win.t_mid, n1, |t, y| sampler.observe(t, y))?;

    let s = c(&y, 2);
    let s_new = s * kernel;
    let dephased = s.norm_sqr() - s_new.norm_sqr();
    y[4] = s_new.re;
    y[5] = s_new.im;
    let leaked = y[7];
    y[7] = 0.0;

    // the midpoint was already sampled
    sampler.skip_first = true;
    let n2 = steps_for(win.t1 - win.t_mid, dt);
    let y_end = integrate(&mut f, y, win.t_mid, win.t1, n2, |t, y| sampler.observe(t, y))?;

    let residual = c(&y_end, 0).norm_sqr() + c(&y_end, 1).norm_sqr() + c(&y_end, 2).norm_sqr();
    Ok(RunOutput {
        times: sampler.times,
        flux: sampler.flux,
        field: sampler.field,
        spin: sampler.spin,
        ledger: PhotonLedger {
            input: y_end[6],
            leaked,
            retrieved: y_end[7],
            scattered: y_end[8],
            spin_decayed: y_end[9],
            dephased,
            residual,
        },
    })
}

fn validate_pulses(p: &PulseSet) -> Result<()> {
    p.signal.validate("signal")?;
    p.write.validate("write")?;
    p.read.validate("read")?;
    let sep = p.read.center_ns - p.write.center_ns;
    let min_sep = p.write.fwhm_ns + p.read.fwhm_ns;
    if sep < min_sep {
        return Err(Error::domain(format!(
            "read pulse must follow the write pulse by at least the sum of their widths ({min_sep} ns), got {sep} ns"
        )));
    }
    if p.read.center_ns <= p.signal.center_ns {
        return Err(Error::domain("read pulse must come after the signal"));
    }
    if p.signal.energy <= 0.0 {
        return Err(Error::domain("signal pulse carries no photons"));
    }
    Ok(())
}

/// Simulates the reference (control off) and storage runs for one pulse set.
///
/// The cavity resonance is offset from the bare mode by the static
/// dispersive shift of the atoms, so the dressed cavity is resonant with the
/// signal carrier; `cavity_drift_ghz` detunes it from there and also lowers
/// the control buildup. The dephasing kernel acts on the spin wave at the
/// end of the leak window.
pub fn simulate_storage_retrieval(config: &MemoryConfig, pulses: &PulseSet) -> Result<SimulationResult> {
    config.validate()?;
    validate_pulses(pulses)?;
    let res = simulate_at(config, pulses, config.dt_ns)?;
    if !config.check_convergence {
        return Ok(res);
    }
    let fine = simulate_at(config, pulses, config.dt_ns / 2.0)?;
    let scale = res.internal_efficiency.abs().max(1e-12);
    let delta = (fine.internal_efficiency - res.internal_efficiency).abs() / scale;
    if delta > 1e-3 {
        return Err(Error::numerical(
            "step-size convergence failure",
            format!(
                "internal efficiency {} at dt = {} ns vs {} at dt/2 (relative change {delta:e})",
                res.internal_efficiency,
                config.dt_ns,
                fine.internal_efficiency
            ),
        ));
    }
    Ok(SimulationResult { convergence_delta: Some(delta), ..res })
}

struct Setup {
    rates: Rates,
    drive: Drive,
    win: Window,
    kernel: Complex64,
}

fn setup(config: &MemoryConfig, pulses: &PulseSet) -> Result<Setup> {
    let kappa = config.kappa()?;
    let g = config.coupling()?;
    let delta = TAU * config.intermediate_detuning_ghz;
    let gamma = TAU * config.polarization_decay_mhz * 1e-3;
    let dispersive = g * g * delta / (delta * delta + gamma * gamma / 4.0);
    let drift = config.cavity_drift_ghz;
    let cav = &config.cavity;
    let control_buildup = cav.buildup(drift) / cav.buildup(0.0);

    let sig = pulses.signal;
    let signal_amp = (sig.energy / sig.envelope_norm()).sqrt();
    let peak = |p: &PulseShape| config.rabi_calibration * (p.energy / p.fwhm_ns).sqrt() * control_buildup.sqrt();
    let write = pulses.write;
    let read = pulses.read;
    let rates = Rates {
        kappa,
        g,
        delta,
        gamma,
        gamma_m: TAU * config.spin_decay_mhz * 1e-3,
        cavity_detuning: dispersive + TAU * drift,
        two_photon: TAU * (sig.carrier_detuning_ghz + write.carrier_detuning_ghz),
    };
    let drive = Drive {
        signal: sig,
        signal_amp,
        controls: [(write, peak(&write)), (read, peak(&read))],
        control_offsets: [0.0, TAU * (read.carrier_detuning_ghz - write.carrier_detuning_ghz)],
        signal_offset: TAU * sig.carrier_detuning_ghz,
    };
    let t_mid = config
        .leak_window_end_ns
        .unwrap_or(0.5 * (write.center_ns + read.center_ns));
    let t0 = (sig.center_ns - 4.0 * sig.fwhm_ns).min(write.center_ns - 4.0 * write.fwhm_ns);
    let tail = 3.0 + 20.0 / kappa;
    let t1 = (read.center_ns + 4.0 * read.fwhm_ns).max(sig.center_ns + 4.0 * sig.fwhm_ns) + tail;
    if !(t_mid > t0 && t_mid < t1) {
        return Err(Error::domain(format!(
            "leak window end {t_mid} ns lies outside the simulated interval {t0}..{t1} ns"
        )));
    }
    // the kernel acts once, at t_mid, so storage has to be complete by then
    if t_mid < sig.center_ns + sig.fwhm_ns {
        return Err(Error::domain(format!(
            "leak window end {t_mid} ns falls before the signal is over ({} ns)",
            sig.center_ns + sig.fwhm_ns
        )));
    }
    let win = Window { t0, t_mid, t1 };
    let kernel = dephasing_kernel(pulses.storage_time_ns(), &config.decay_params());
    Ok(Setup { rates, drive, win, kernel })
}

/// Sampled intracavity field, spin wave and the two control Rabi
/// frequencies of a storage run (0.01 ns spacing).
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrace {
    pub time_grid_ns: Vec<f64>,
    pub field: Vec<Complex64>,
    pub spin: Vec<Complex64>,
    pub write_rabi: Vec<Complex64>,
    pub read_rabi: Vec<Complex64>,
}

/// Runs the storage experiment and returns the internal amplitudes.
pub fn amplitude_trace(config: &MemoryConfig, pulses: &PulseSet) -> Result<AmplitudeTrace> {
    config.validate()?;
    validate_pulses(pulses)?;
    let su = setup(config, pulses)?;
    let out = run(&su.rates, &su.drive, &su.win, config.dt_ns, su.kernel)?;
    let only = |k: usize| {
        let mut d = su.drive.clone();
        d.controls[1 - k].1 = 0.0;
        out.times.iter().map(|&t| d.omega(t)).collect::<Vec<_>>()
    };
    Ok(AmplitudeTrace {
        write_rabi: only(0),
        read_rabi: only(1),
        time_grid_ns: out.times,
        field: out.field,
        spin: out.spin,
    })
}

fn simulate_at(config: &MemoryConfig, pulses: &PulseSet, dt: f64) -> Result<SimulationResult> {
    let Setup { rates, drive, win, kernel } = setup(config, pulses)?;
    let mut reference_drive = drive.clone();
    reference_drive.controls[0].1 = 0.0;
    reference_drive.controls[1].1 = 0.0;
    let storage = pulses.storage_time_ns();
    let t_mid = win.t_mid;

    let main = run(&rates, &drive, &win, dt, kernel)?;
    let reference = run(&rates, &reference_drive, &win, dt, Complex64::new(1.0, 0.0))?;

    let l = main.ledger;
    let ref_out = reference.ledger.leaked + reference.ledger.retrieved;
    let keep = 1.0 - config.insertion_loss;
    let reference_counts = keep * ref_out;
    // what the reference run still emits in the retrieval window (free
    // polarization decay) is background, not recall
    let background = reference.ledger.retrieved;
    let recalled = (l.retrieved - background).max(0.0);
    let retrieved_counts = keep * recalled;
    let total_efficiency = super::total_efficiency(retrieved_counts, reference_counts, config.insertion_loss)?;
    let internal_efficiency = if l.input > 0.0 { recalled / l.input } else { 0.0 };
    let snr_db = if config.noise_photons_per_pulse > 0.0 {
        snr(retrieved_counts, config.noise_photons_per_pulse)?
    } else {
        f64::INFINITY
    };
    Ok(SimulationResult {
        time_grid_ns: main.times,
        output_flux: main.flux,
        reference_flux: reference.flux,
        reference_counts,
        leak_counts: keep * l.leaked,
        retrieved_counts,
        background_counts: keep * background,
        internal_efficiency,
        total_efficiency,
        snr_db,
        ledger: l,
        leak_window_end_ns: t_mid,
        storage_time_ns: storage,
        convergence_delta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_pulses_rejected() {
        let cfg = MemoryConfig::default();
        let p = PulseSet::default().with_storage_time(1.0);
        assert!(matches!(simulate_storage_retrieval(&cfg, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn photons_are_accounted_for() {
        let cfg = MemoryConfig { dt_ns: 0.005, ..MemoryConfig::default() };
        let r = simulate_storage_retrieval(&cfg, &PulseSet::default()).unwrap();
        assert!((r.ledger.input - 0.8).abs() < 1e-3, "{:?}", r.ledger);
        assert!(r.ledger.imbalance() < 1e-4 * r.ledger.input, "{:?}", r.ledger);
    }
}
