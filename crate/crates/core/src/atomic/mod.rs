//! Hyperfine and Zeeman structure of the ladder manifolds.
//!
//! Energies are in MHz measured from each manifold's zero-field hyperfine
//! centroid (the Hamiltonian is traceless in the product basis, so the
//! centroid stays at zero for every field). Line positions are in GHz.

mod angular;
mod hamiltonian;
mod lines;

pub use angular::{clebsch_gordan, projections};
pub use hamiltonian::{
    breit_rabi_curve, build_hamiltonian, diagonalize_manifold, ladder_states, zero_field_energy,
    BreitRabiTable, Discontinuity, REFERENCE_FIELD_MT,
};
pub use lines::{
    aggregate_two_photon, dipole_strength_matrix, transition_lines, two_photon_lines,
    LadderSpectroscopy, TwoPhotonResonance, INTERMEDIATE_WIDTH_GHZ, LINE_OMISSION_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One fine-structure term of the atom with its hyperfine constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub label: String,
    /// Orbital angular momentum, used for the dipole selection rule.
    pub l: u32,
    pub j: f64,
    pub i: f64,
    pub a_hfs_mhz: f64,
    pub b_hfs_mhz: f64,
    pub g_j: f64,
    pub g_i: f64,
    /// Bohr magneton over Planck's constant.
    #[serde(default = "default_bohr_magneton")]
    pub bohr_magneton_mhz_per_mt: f64,
}

/// CODATA 2018 value of the Bohr magneton over h, in MHz/mT.
pub const BOHR_MAGNETON_MHZ_PER_MT: f64 = 13.996_244_936;

fn default_bohr_magneton() -> f64 {
    BOHR_MAGNETON_MHZ_PER_MT
}

fn doubled(x: f64, what: &str) -> Result<i32> {
    let t = 2.0 * x;
    if x < 0.0 || (t - t.round()).abs() > 1e-12 {
        return Err(Error::structural(format!(
            "{what} = {x} is not a non-negative multiple of 1/2"
        )));
    }
    Ok(t.round() as i32)
}

impl ManifoldSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: &str,
        l: u32,
        j: f64,
        i: f64,
        a_hfs_mhz: f64,
        b_hfs_mhz: f64,
        g_j: f64,
        g_i: f64,
    ) -> Result<Self> {
        let spec = ManifoldSpec {
            label: label.to_string(),
            l,
            j,
            i,
            a_hfs_mhz,
            b_hfs_mhz,
            g_j,
            g_i,
            bohr_magneton_mhz_per_mt: BOHR_MAGNETON_MHZ_PER_MT,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let tj = doubled(self.j, "J")?;
        doubled(self.i, "I")?;
        if tj == 0 {
            return Err(Error::structural(format!(
                "{}: J must be positive",
                self.label
            )));
        }
        if tj == 1 && self.b_hfs_mhz != 0.0 {
            return Err(Error::structural(format!(
                "{}: quadrupole constant must vanish for J = 1/2",
                self.label
            )));
        }
        let ti = (2.0 * self.i).round() as i32;
        if ti < 2 && self.b_hfs_mhz != 0.0 {
            return Err(Error::structural(format!(
                "{}: quadrupole constant must vanish for I < 1",
                self.label
            )));
        }
        let spin_2s = (2 * self.l as i32 - tj).abs();
        if spin_2s != 1 {
            return Err(Error::structural(format!(
                "{}: J = {} is not L +/- 1/2 for L = {}",
                self.label, self.j, self.l
            )));
        }
        if !(self.bohr_magneton_mhz_per_mt > 0.0) {
            return Err(Error::structural("Bohr magneton must be positive"));
        }
        Ok(())
    }

    pub fn two_j(&self) -> i32 {
        (2.0 * self.j).round() as i32
    }

    pub fn two_i(&self) -> i32 {
        (2.0 * self.i).round() as i32
    }

    /// `(2J+1)(2I+1)`.
    pub fn dimension(&self) -> usize {
        ((self.two_j() + 1) * (self.two_i() + 1)) as usize
    }

    /// Product basis `|m_j, m_i>` as doubled projections, `m_j` outer and
    /// descending, `m_i` inner and descending.
    pub fn basis(&self) -> Vec<(i32, i32)> {
        projections(self.two_j())
            .flat_map(|mj| projections(self.two_i()).map(move |mi| (mj, mi)))
            .collect()
    }
}

/// Field-dressed eigenstate of one manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeemanState {
    pub manifold: String,
    /// 1-based label, B-continuous. Ladder-wide (1..=48) when produced by
    /// [`ladder_states`], manifold-local otherwise.
    pub index: usize,
    pub energy_mhz: f64,
    /// Twice the conserved `m_F`.
    pub two_mf: i32,
    /// Amplitudes over [`ManifoldSpec::basis`]. The Hamiltonian is real
    /// symmetric in that basis, so the amplitudes are real; the sign is
    /// fixed by making the largest component positive.
    pub composition: Vec<f64>,
    /// `(m_j, m_i)` of the largest amplitude.
    pub dominant_mj_mi: (f64, f64),
}

impl ZeemanState {
    pub fn m_f(&self) -> f64 {
        self.two_mf as f64 / 2.0
    }

    /// Squared weight of the dominant product state.
    pub fn purity(&self) -> f64 {
        self.composition.iter().map(|c| c * c).fold(0.0, f64::max)
    }

    pub fn label(&self) -> StateLabel {
        StateLabel {
            index: self.index,
            two_mf: self.two_mf,
            energy_mhz: self.energy_mhz,
            dominant_mj_mi: self.dominant_mj_mi,
        }
    }
}

/// Compact reference to a [`ZeemanState`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateLabel {
    pub index: usize,
    pub two_mf: i32,
    pub energy_mhz: f64,
    pub dominant_mj_mi: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
    #[serde(rename = "pi")]
    Pi,
}

impl Polarization {
    pub const ALL: [Polarization; 3] = [
        Polarization::SigmaPlus,
        Polarization::SigmaMinus,
        Polarization::Pi,
    ];
    pub const CIRCULAR: [Polarization; 2] = [Polarization::SigmaPlus, Polarization::SigmaMinus];

    /// Change of `m_F` driven in absorption.
    pub fn q(self) -> i32 {
        match self {
            Polarization::SigmaPlus => 1,
            Polarization::SigmaMinus => -1,
            Polarization::Pi => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarization::SigmaPlus => "sigma+",
            Polarization::SigmaMinus => "sigma-",
            Polarization::Pi => "pi",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigma+" | "s+" | "sigma_plus" | "+" => Ok(Polarization::SigmaPlus),
            "sigma-" | "s-" | "sigma_minus" | "-" => Ok(Polarization::SigmaMinus),
            "pi" | "0" => Ok(Polarization::Pi),
            other => Err(Error::domain(format!("unknown polarization '{other}'"))),
        }
    }
}

/// One-photon line between two field-dressed states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub lower: StateLabel,
    pub upper: StateLabel,
    pub polarization: Polarization,
    /// GHz from the zero-field line centroid.
    pub detuning_ghz: f64,
    /// Squared dipole matrix element normalised to the strongest line of the
    /// manifold pair (all polarizations).
    pub strength: f64,
    /// Un-normalised squared matrix element in units of the reduced element.
    pub raw_strength: f64,
}

/// One ladder path ground -> intermediate -> doubly excited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonLine {
    pub ground: StateLabel,
    pub intermediate: StateLabel,
    pub doubly_excited: StateLabel,
    pub signal_pol: Polarization,
    pub control_pol: Polarization,
    /// Signal resonance of the first step, GHz from the field-free centroid.
    pub signal_detuning_ghz: f64,
    /// Control resonance of the second step, GHz from the field-free centroid.
    pub control_detuning_ghz: f64,
    /// Signed product of the two dipole matrix elements.
    pub amplitude: f64,
    /// Intermediate-detuning weight `1 / (1 + (dI / G_eff)^2)`.
    pub weight: f64,
    /// Product of the two one-photon strengths times `weight`.
    pub strength: f64,
    pub is_loss_channel: bool,
}

impl TwoPhotonLine {
    /// Total two-photon detuning from the field-free 5S -> 5D interval.
    pub fn two_photon_detuning_ghz(&self) -> f64 {
        self.signal_detuning_ghz + self.control_detuning_ghz
    }
}

/// Only `(sigma-, sigma-)` addresses the memory transition in the
/// counter-propagating orientation; every other pair is a loss channel.
pub fn is_loss_channel(signal: Polarization, control: Polarization) -> bool {
    !(signal == Polarization::SigmaMinus && control == Polarization::SigmaMinus)
}
