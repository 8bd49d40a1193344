use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    clebsch_gordan, is_loss_channel, ladder_states, ManifoldSpec, Polarization, StateLabel,
    TransitionLine, TwoPhotonLine, ZeemanState,
};
use crate::error::{Error, Result};

/// Lines weaker than this fraction of the strongest line are dropped.
pub const LINE_OMISSION_THRESHOLD: f64 = 1e-6;

/// Effective width (GHz) of the intermediate-detuning weight. Set to the
/// Doppler width of the signal transition.
pub const INTERMEDIATE_WIDTH_GHZ: f64 = 0.55;

fn check_pair(lower: &ManifoldSpec, upper: &ManifoldSpec) -> Result<()> {
    if (lower.l as i64 - upper.l as i64).abs() != 1 {
        return Err(Error::domain(format!(
            "{} -> {} is not dipole allowed (L {} -> {})",
            lower.label, upper.label, lower.l, upper.l
        )));
    }
    if (lower.two_i() != upper.two_i()) || (lower.two_j() - upper.two_j()).abs() > 2 {
        return Err(Error::domain(format!(
            "{} -> {} violates the J or I selection rule",
            lower.label, upper.label
        )));
    }
    Ok(())
}

/// `<upper|d_q|lower>` for every pair of dressed states, in units of the
/// reduced matrix element. Rows are upper states, columns lower states, in
/// the order given.
pub fn dipole_strength_matrix(
    lower: &ManifoldSpec,
    upper: &ManifoldSpec,
    lower_states: &[ZeemanState],
    upper_states: &[ZeemanState],
    pol: Polarization,
) -> Result<DMatrix<f64>> {
    check_pair(lower, upper)?;
    let q = pol.q();
    let lb = lower.basis();
    let ub = upper.basis();
    // product-basis coupling: nuclear spin is a spectator
    let mut d = DMatrix::zeros(ub.len(), lb.len());
    for (c, &(mj, mi)) in lb.iter().enumerate() {
        for (r, &(mju, miu)) in ub.iter().enumerate() {
            if miu == mi && mju == mj + 2 * q {
                d[(r, c)] = clebsch_gordan(lower.two_j(), mj, 2, 2 * q, upper.two_j(), mju);
            }
        }
    }
    let cu = DMatrix::from_fn(ub.len(), upper_states.len(), |r, c| {
        upper_states[c].composition[r]
    });
    let cl = DMatrix::from_fn(lb.len(), lower_states.len(), |r, c| {
        lower_states[c].composition[r]
    });
    Ok(cu.transpose() * d * cl)
}

/// Field-dressed states and dipole matrices of the full ladder at one field.
#[derive(Debug, Clone)]
pub struct LadderSpectroscopy {
    pub b_mt: f64,
    pub manifolds: [ManifoldSpec; 3],
    pub states: [Vec<ZeemanState>; 3],
    /// `signal[q]`: ground -> intermediate amplitudes, normalised so the
    /// strongest line over all polarizations has unit strength.
    signal: [DMatrix<f64>; 3],
    control: [DMatrix<f64>; 3],
    signal_raw_max: f64,
    control_raw_max: f64,
}

fn pol_slot(p: Polarization) -> usize {
    match p {
        Polarization::SigmaPlus => 0,
        Polarization::SigmaMinus => 1,
        Polarization::Pi => 2,
    }
}

fn normalised(mats: [DMatrix<f64>; 3]) -> ([DMatrix<f64>; 3], f64) {
    let max = mats
        .iter()
        .flat_map(|m| m.iter())
        .fold(0.0f64, |acc, x| acc.max(x * x));
    let scale = if max > 0.0 { 1.0 / max.sqrt() } else { 0.0 };
    (mats.map(|m| m * scale), max)
}

impl LadderSpectroscopy {
    pub fn new(manifolds: &[ManifoldSpec; 3], b_mt: f64) -> Result<Self> {
        check_pair(&manifolds[0], &manifolds[1])?;
        check_pair(&manifolds[1], &manifolds[2])?;
        let states = ladder_states(manifolds, b_mt)?;
        let mk = |lo: usize, p: Polarization| {
            dipole_strength_matrix(
                &manifolds[lo],
                &manifolds[lo + 1],
                &states[lo],
                &states[lo + 1],
                p,
            )
        };
        let sig = [
            mk(0, Polarization::SigmaPlus)?,
            mk(0, Polarization::SigmaMinus)?,
            mk(0, Polarization::Pi)?,
        ];
        let ctl = [
            mk(1, Polarization::SigmaPlus)?,
            mk(1, Polarization::SigmaMinus)?,
            mk(1, Polarization::Pi)?,
        ];
        let (signal, signal_raw_max) = normalised(sig);
        let (control, control_raw_max) = normalised(ctl);
        Ok(LadderSpectroscopy {
            b_mt,
            manifolds: manifolds.clone(),
            states,
            signal,
            control,
            signal_raw_max,
            control_raw_max,
        })
    }

    /// Normalised one-photon amplitude matrix for step 0 (signal) or 1 (control).
    pub fn amplitudes(&self, step: usize, pol: Polarization) -> &DMatrix<f64> {
        match step {
            0 => &self.signal[pol_slot(pol)],
            _ => &self.control[pol_slot(pol)],
        }
    }

    /// One-photon lines of step 0 (ground -> intermediate) or 1
    /// (intermediate -> doubly excited).
    pub fn one_photon_lines(&self, step: usize, pol: Polarization) -> Vec<TransitionLine> {
        let step = step.min(1);
        let raw_max = if step == 0 {
            self.signal_raw_max
        } else {
            self.control_raw_max
        };
        let amp = self.amplitudes(step, pol);
        let (lo, up) = (&self.states[step], &self.states[step + 1]);
        let mut out = Vec::new();
        for (c, l) in lo.iter().enumerate() {
            for (r, u) in up.iter().enumerate() {
                let s = amp[(r, c)].powi(2);
                if s < LINE_OMISSION_THRESHOLD {
                    continue;
                }
                out.push(TransitionLine {
                    lower: l.label(),
                    upper: u.label(),
                    polarization: pol,
                    detuning_ghz: (u.energy_mhz - l.energy_mhz) * 1e-3,
                    strength: s,
                    raw_strength: s * raw_max,
                });
            }
        }
        out.sort_by(|a, b| a.detuning_ghz.total_cmp(&b.detuning_ghz));
        out
    }

    /// Every ladder path for one polarization pair whose total two-photon
    /// detuning lies in `window_ghz`. `signal_detuning_ghz` is the signal
    /// laser's offset from the intermediate centroid and only enters the
    /// path weight; `None` gives every path unit weight (the far-detuned
    /// limit).
    pub fn two_photon_lines(
        &self,
        signal_pol: Polarization,
        control_pol: Polarization,
        window_ghz: (f64, f64),
        signal_detuning_ghz: Option<f64>,
    ) -> Vec<TwoPhotonLine> {
        let a1 = self.amplitudes(0, signal_pol);
        let a2 = self.amplitudes(1, control_pol);
        let [g, e, f] = &self.states;
        let (lo, hi) = (
            window_ghz.0.min(window_ghz.1),
            window_ghz.0.max(window_ghz.1),
        );
        let mut out = Vec::new();
        for (ig, gs) in g.iter().enumerate() {
            for (ie, es) in e.iter().enumerate() {
                let d1 = a1[(ie, ig)];
                if d1 * d1 < LINE_OMISSION_THRESHOLD {
                    continue;
                }
                for (jf, fs) in f.iter().enumerate() {
                    let d2 = a2[(jf, ie)];
                    if d2 * d2 < LINE_OMISSION_THRESHOLD {
                        continue;
                    }
                    let signal_det = (es.energy_mhz - gs.energy_mhz) * 1e-3;
                    let control_det = (fs.energy_mhz - es.energy_mhz) * 1e-3;
                    let total = signal_det + control_det;
                    if total < lo || total > hi {
                        continue;
                    }
                    let weight = path_factor(signal_detuning_ghz, signal_det).norm_sqr();
                    out.push(TwoPhotonLine {
                        ground: gs.label(),
                        intermediate: es.label(),
                        doubly_excited: fs.label(),
                        signal_pol,
                        control_pol,
                        signal_detuning_ghz: signal_det,
                        control_detuning_ghz: control_det,
                        amplitude: d1 * d2,
                        weight,
                        strength: d1 * d1 * d2 * d2 * weight,
                        is_loss_channel: is_loss_channel(signal_pol, control_pol),
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            a.two_photon_detuning_ghz()
                .total_cmp(&b.two_photon_detuning_ghz())
                .then(a.intermediate.index.cmp(&b.intermediate.index))
        });
        out
    }

    /// Two-photon resonances (one per ground/doubly-excited pair) with all
    /// intermediate paths summed coherently.
    pub fn resonances(
        &self,
        signal_pol: Polarization,
        control_pol: Polarization,
        window_ghz: (f64, f64),
        signal_detuning_ghz: Option<f64>,
    ) -> Vec<TwoPhotonResonance> {
        aggregate_two_photon(
            &self.two_photon_lines(signal_pol, control_pol, window_ghz, signal_detuning_ghz),
            signal_detuning_ghz,
        )
    }

    /// Resonances for all nine polarization pairs.
    pub fn all_resonances(
        &self,
        window_ghz: (f64, f64),
        signal_detuning_ghz: Option<f64>,
    ) -> Vec<TwoPhotonResonance> {
        let mut out = Vec::new();
        for sp in Polarization::ALL {
            for cp in Polarization::ALL {
                out.extend(self.resonances(sp, cp, window_ghz, signal_detuning_ghz));
            }
        }
        out.sort_by(|a, b| a.detuning_ghz.total_cmp(&b.detuning_ghz));
        out
    }

    /// The storage transition: the `(sigma-, sigma-)` resonance with the
    /// largest far-detuned strength.
    pub fn memory_line(&self) -> Result<TwoPhotonResonance> {
        self.resonances(
            Polarization::SigmaMinus,
            Polarization::SigmaMinus,
            (f64::NEG_INFINITY, f64::INFINITY),
            None,
        )
        .into_iter()
        .max_by(|a, b| a.strength.total_cmp(&b.strength))
        .ok_or_else(|| Error::structural("no (sigma-, sigma-) two-photon resonance found"))
    }

    /// `(sigma-, sigma-)` resonances within `half_width_ghz` of the memory
    /// line whose far-detuned strength is at least `min_relative` of it,
    /// sorted by detuning. The memory line itself is included.
    pub fn addressable_lines(
        &self,
        half_width_ghz: f64,
        min_relative: f64,
    ) -> Result<Vec<TwoPhotonResonance>> {
        let mem = self.memory_line()?;
        let c = mem.detuning_ghz;
        Ok(self
            .resonances(
                Polarization::SigmaMinus,
                Polarization::SigmaMinus,
                (c - half_width_ghz, c + half_width_ghz),
                None,
            )
            .into_iter()
            .filter(|r| r.strength >= min_relative * mem.strength)
            .collect())
    }

    /// Loss-channel resonances within `half_width_ghz` of `center_ghz`.
    /// Both beams propagate along the field, so only circular pairs count.
    pub fn loss_channels_near(
        &self,
        center_ghz: f64,
        half_width_ghz: f64,
        signal_detuning_ghz: Option<f64>,
    ) -> Vec<TwoPhotonResonance> {
        self.all_resonances(
            (center_ghz - half_width_ghz, center_ghz + half_width_ghz),
            signal_detuning_ghz,
        )
        .into_iter()
        .filter(|r| {
            r.is_loss_channel
                && r.signal_pol != Polarization::Pi
                && r.control_pol != Polarization::Pi
        })
        .collect()
    }
}

/// Coherent sum of the ladder paths sharing ground and doubly excited state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonResonance {
    pub ground: StateLabel,
    pub doubly_excited: StateLabel,
    pub signal_pol: Polarization,
    pub control_pol: Polarization,
    pub detuning_ghz: f64,
    /// `sum_e d2 d1 / (1 - i dI / G_eff)`.
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub strength: f64,
    pub paths: usize,
    pub is_loss_channel: bool,
}

impl TwoPhotonResonance {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.amplitude_re, self.amplitude_im)
    }
}

/// `1 / (1 - i dI / G_eff)` for a path whose intermediate resonance sits at
/// `path_ghz`; unity when no signal detuning is given.
fn path_factor(signal_detuning_ghz: Option<f64>, path_ghz: f64) -> Complex64 {
    match signal_detuning_ghz {
        Some(d) => {
            Complex64::new(1.0, 0.0) / Complex64::new(1.0, -(d - path_ghz) / INTERMEDIATE_WIDTH_GHZ)
        }
        None => Complex64::new(1.0, 0.0),
    }
}

pub fn aggregate_two_photon(
    lines: &[TwoPhotonLine],
    signal_detuning_ghz: Option<f64>,
) -> Vec<TwoPhotonResonance> {
    let mut out: Vec<TwoPhotonResonance> = Vec::new();
    let mut incoherent: Vec<f64> = Vec::new();
    for l in lines {
        let amp = l.amplitude * path_factor(signal_detuning_ghz, l.signal_detuning_ghz);
        let key = (
            l.ground.index,
            l.doubly_excited.index,
            l.signal_pol,
            l.control_pol,
        );
        match out.iter_mut().enumerate().find(|(_, r)| {
            (
                r.ground.index,
                r.doubly_excited.index,
                r.signal_pol,
                r.control_pol,
            ) == key
        }) {
            Some((k, r)) => {
                incoherent[k] += amp.norm_sqr();
                r.amplitude_re += amp.re;
                r.amplitude_im += amp.im;
                r.paths += 1;
            }
            None => {
                incoherent.push(amp.norm_sqr());
                out.push(TwoPhotonResonance {
                    ground: l.ground,
                    doubly_excited: l.doubly_excited,
                    signal_pol: l.signal_pol,
                    control_pol: l.control_pol,
                    detuning_ghz: l.two_photon_detuning_ghz(),
                    amplitude_re: amp.re,
                    amplitude_im: amp.im,
                    strength: 0.0,
                    paths: 1,
                    is_loss_channel: l.is_loss_channel,
                })
            }
        }
    }
    for r in &mut out {
        r.strength = r.amplitude().norm_sqr();
    }
    // drop resonances whose paths interfere away
    let mut k = 0;
    out.retain(|r| {
        let keep = r.strength >= LINE_OMISSION_THRESHOLD * incoherent[k];
        k += 1;
        keep
    });
    out.sort_by(|a, b| a.detuning_ghz.total_cmp(&b.detuning_ghz));
    out
}

/// One-photon lines between two manifolds. `None` returns every polarization.
pub fn transition_lines(
    lower: &ManifoldSpec,
    upper: &ManifoldSpec,
    b_mt: f64,
    pol: Option<Polarization>,
) -> Result<Vec<TransitionLine>> {
    check_pair(lower, upper)?;
    let ls = super::diagonalize_manifold(lower, b_mt)?;
    let us = super::diagonalize_manifold(upper, b_mt)?;
    let mats: Vec<(Polarization, DMatrix<f64>)> = Polarization::ALL
        .iter()
        .map(|&p| dipole_strength_matrix(lower, upper, &ls, &us, p).map(|m| (p, m)))
        .collect::<Result<_>>()?;
    let max = mats
        .iter()
        .flat_map(|(_, m)| m.iter())
        .fold(0.0f64, |acc, x| acc.max(x * x));
    let mut out = Vec::new();
    for (p, m) in &mats {
        if pol.is_some_and(|want| want != *p) {
            continue;
        }
        for (c, l) in ls.iter().enumerate() {
            for (r, u) in us.iter().enumerate() {
                let raw = m[(r, c)].powi(2);
                if raw < LINE_OMISSION_THRESHOLD * max {
                    continue;
                }
                out.push(TransitionLine {
                    lower: l.label(),
                    upper: u.label(),
                    polarization: *p,
                    detuning_ghz: (u.energy_mhz - l.energy_mhz) * 1e-3,
                    strength: raw / max,
                    raw_strength: raw,
                });
            }
        }
    }
    out.sort_by(|a, b| a.detuning_ghz.total_cmp(&b.detuning_ghz));
    Ok(out)
}

/// Ladder paths for one polarization pair at field `b_mt`; see
/// [`LadderSpectroscopy::two_photon_lines`].
pub fn two_photon_lines(
    ladder: &[ManifoldSpec; 3],
    b_mt: f64,
    signal_pol: Polarization,
    control_pol: Polarization,
    window_ghz: (f64, f64),
    signal_detuning_ghz: Option<f64>,
) -> Result<Vec<TwoPhotonLine>> {
    if !(window_ghz.0 < window_ghz.1) {
        return Err(Error::domain("two-photon window must be a non-empty range"));
    }
    Ok(LadderSpectroscopy::new(ladder, b_mt)?.two_photon_lines(
        signal_pol,
        control_pol,
        window_ghz,
        signal_detuning_ghz,
    ))
}
