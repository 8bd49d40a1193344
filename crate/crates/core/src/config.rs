//! Experiment configuration shared by the command-line tool and the library.
//!
//! The file is JSON. Every section is optional and falls back to the
//! operating point below; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atomic::{ManifoldSpec, Polarization};
use crate::cavity::CavityParams;
use crate::constants::AtomData;
use crate::error::{Error, Result};
use crate::memory::{MemoryConfig, PulseSet};
use crate::optimize::{DriftModel, GaSettings, ParameterRange, ParameterSpace};
use crate::vapour::{Geometry, VapourParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomicSection {
    /// Constants file; `None` defers to the environment override and then
    /// the built-in table.
    pub constants_path: Option<PathBuf>,
    pub field_mt: f64,
}

impl Default for AtomicSection {
    fn default() -> Self {
        AtomicSection { constants_path: None, field_mt: 169.0 }
    }
}

/// Evenly spaced grid `start, start + step, ...` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Grids above this many points are refused.
pub const MAX_GRID_LEN: usize = 1_000_000;

impl GridSpec {
    pub const fn new(start: f64, stop: f64, step: f64) -> Self {
        GridSpec { start, stop, step }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() || self.stop < self.start {
            return Err(Error::config(format!("bad grid {self:?}: need start <= stop and step > 0")));
        }
        // tolerate rounding at the end point
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > MAX_GRID_LEN {
            return Err(Error::config(format!("grid of {n} points is too large")));
        }
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub signal_polarization: Polarization,
    pub control_polarization: Polarization,
    pub geometry: Geometry,
    /// Signal offset from the intermediate centroid while scanning the control.
    pub signal_detuning_ghz: f64,
    /// Peak two-photon depth of the strongest resonance.
    pub control_depth: f64,
    /// Control detuning grid (GHz, from the 5P-5D centroid).
    pub control_grid_ghz: GridSpec,
    /// Signal detuning grid of the one-photon spectrum.
    pub signal_grid_ghz: GridSpec,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            signal_polarization: Polarization::SigmaMinus,
            control_polarization: Polarization::SigmaMinus,
            geometry: Geometry::CounterPropagating,
            signal_detuning_ghz: -8.0,
            control_depth: 1.0,
            control_grid_ghz: GridSpec::new(-1.0, 2.5, 0.001),
            signal_grid_ghz: GridSpec::new(-8.0, 8.0, 0.005),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavityScanSection {
    pub detuning_grid_ghz: GridSpec,
    pub map_signal_grid_ghz: GridSpec,
    pub map_control_grid_ghz: GridSpec,
    /// Common shift of both resonance combs, e.g. from a temperature change.
    pub map_shift_ghz: f64,
    /// Control mismatch below which a pair counts as dual resonant.
    pub dual_resonance_tolerance_ghz: f64,
}

impl Default for CavityScanSection {
    fn default() -> Self {
        CavityScanSection {
            detuning_grid_ghz: GridSpec::new(-12.0, 12.0, 0.01),
            map_signal_grid_ghz: GridSpec::new(-20.0, 20.0, 0.05),
            map_control_grid_ghz: GridSpec::new(-20.0, 20.0, 0.05),
            map_shift_ghz: 0.0,
            dual_resonance_tolerance_ghz: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub storage_time_ns: GridSpec,
    pub write_energy_nj: GridSpec,
    pub signal_fwhm_ns: Vec<f64>,
    /// Nelder-Mead budget per bandwidth point.
    pub bandwidth_max_evaluations: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            storage_time_ns: GridSpec::new(10.0, 100.0, 0.5),
            write_energy_nj: GridSpec::new(0.02, 0.6, 0.02),
            signal_fwhm_ns: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
            bandwidth_max_evaluations: 600,
        }
    }
}

/// Which parameters the optimizer tunes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceChoice {
    /// All eight pulse parameters.
    Full,
    /// Write energy and two-photon detuning only.
    EnergyDetuning,
    Custom(Vec<ParameterRange>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub ga: GaSettings,
    pub drift: DriftModel,
    pub space: SpaceChoice,
    /// Points per axis of the grid-search oracle.
    pub grid_points: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            ga: GaSettings::default(),
            drift: DriftModel::default(),
            space: SpaceChoice::Full,
            grid_points: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub atomic: AtomicSection,
    pub vapour: VapourParams,
    pub cavity: CavityParams,
    pub cavity_scan: CavityScanSection,
    pub spectrum: SpectrumSection,
    pub memory: MemoryConfig,
    pub pulses: PulseSet,
    pub scans: ScanSection,
    pub optimizer: OptimizerSection,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            atomic: AtomicSection::default(),
            vapour: VapourParams::default(),
            cavity: CavityParams::default(),
            cavity_scan: CavityScanSection::default(),
            spectrum: SpectrumSection::default(),
            memory: MemoryConfig::default(),
            pulses: PulseSet::default(),
            scans: ScanSection::default(),
            optimizer: OptimizerSection::default(),
            output_dir: PathBuf::from("out"),
            seed: 2024,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks every section; errors come back as configuration errors.
    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::config(e.to_string()));
        if !(self.atomic.field_mt >= 0.0) || !self.atomic.field_mt.is_finite() {
            return Err(Error::config("atomic.field_mt must be finite and >= 0"));
        }
        wrap(self.vapour.validate())?;
        wrap(self.cavity.validate())?;
        wrap(self.memory_config().validate())?;
        for (name, p) in [("signal", self.pulses.signal), ("write", self.pulses.write), ("read", self.pulses.read)] {
            wrap(p.validate(name))?;
        }
        wrap(self.optimizer.ga.validate())?;
        wrap(self.optimizer.drift.validate())?;
        wrap(self.parameter_space().and_then(|s| s.validate()))?;
        if !(self.spectrum.control_depth >= 0.0) {
            return Err(Error::config("spectrum.control_depth must be >= 0"));
        }
        Ok(())
    }

    /// Memory parameters with the cavity section folded in.
    pub fn memory_config(&self) -> MemoryConfig {
        MemoryConfig { cavity: self.cavity, ..self.memory.clone() }
    }

    pub fn atom_data(&self) -> Result<AtomData> {
        AtomData::resolve(self.atomic.constants_path.as_deref())
    }

    pub fn ladder(&self) -> Result<[ManifoldSpec; 3]> {
        self.atom_data()?.ladder()
    }

    pub fn parameter_space(&self) -> Result<ParameterSpace> {
        match &self.optimizer.space {
            SpaceChoice::Full => Ok(ParameterSpace::full(self.pulses)),
            SpaceChoice::EnergyDetuning => Ok(ParameterSpace::energy_detuning_slice(self.pulses)),
            SpaceChoice::Custom(p) => ParameterSpace::new(p.clone(), self.pulses),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output
    /// directory does not take part.
    pub fn hash(&self) -> String {
        let c = ExperimentConfig { output_dir: PathBuf::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
