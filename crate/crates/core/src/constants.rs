//! Physical constants and the atomic data file.
//!
//! The built-in table ships with the crate (`data/rb87.toml`); a different
//! file can be supplied by path or through the `LADDER_MEMORY_CONSTANTS`
//! environment variable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atomic::ManifoldSpec;
use crate::error::{Error, Result};

pub const CONSTANTS_ENV: &str = "LADDER_MEMORY_CONSTANTS";

const BUILTIN: &str = include_str!("../data/rb87.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub bohr_magneton_mhz_per_mt: f64,
    pub boltzmann_j_per_k: f64,
    pub atomic_mass_unit_kg: f64,
    pub speed_of_light_m_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Species {
    pub name: String,
    pub mass_u: f64,
    pub nuclear_spin: f64,
    pub nuclear_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldEntry {
    pub label: String,
    pub l: u32,
    pub j: f64,
    pub a_hfs_mhz: f64,
    pub b_hfs_mhz: f64,
    pub g_j: f64,
    pub natural_linewidth_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optics {
    pub signal_wavelength_nm: f64,
    pub control_wavelength_nm: f64,
}

/// Two-phase vapour pressure fit, `log10(P / torr) = a - b / T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VapourPressure {
    pub melting_point_k: f64,
    pub solid_a: f64,
    pub solid_b_k: f64,
    pub liquid_a: f64,
    pub liquid_b_k: f64,
}

impl VapourPressure {
    pub fn pressure_torr(&self, temperature_k: f64) -> f64 {
        let (a, b) = if temperature_k < self.melting_point_k {
            (self.solid_a, self.solid_b_k)
        } else {
            (self.liquid_a, self.liquid_b_k)
        };
        10f64.powf(a - b / temperature_k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomData {
    pub version: u32,
    pub physical: Physical,
    pub species: Species,
    pub manifolds: Vec<ManifoldEntry>,
    pub optics: Optics,
    pub vapour_pressure: VapourPressure,
}

impl AtomData {
    /// The table compiled into the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in constants table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let data: AtomData = toml::from_str(text)?;
        data.validate()?;
        Ok(data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Explicit path first, then the environment override, then the built-in table.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            return Self::load(p);
        }
        match std::env::var_os(CONSTANTS_ENV) {
            Some(p) if !p.is_empty() => Self::load(p),
            _ => Ok(Self::builtin()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.manifolds.is_empty() {
            return Err(Error::Config("constants file lists no manifolds".into()));
        }
        for m in &self.manifolds {
            self.spec_from_entry(m)?;
        }
        Ok(())
    }

    fn spec_from_entry(&self, m: &ManifoldEntry) -> Result<ManifoldSpec> {
        ManifoldSpec::new(
            &m.label,
            m.l,
            m.j,
            self.species.nuclear_spin,
            m.a_hfs_mhz,
            m.b_hfs_mhz,
            m.g_j,
            self.species.nuclear_g,
        )
        .map(|mut spec| {
            spec.bohr_magneton_mhz_per_mt = self.physical.bohr_magneton_mhz_per_mt;
            spec
        })
    }

    pub fn manifold(&self, label: &str) -> Result<ManifoldSpec> {
        let entry = self
            .manifolds
            .iter()
            .find(|m| m.label.eq_ignore_ascii_case(label))
            .ok_or_else(|| Error::structural(format!("unknown manifold '{label}'")))?;
        self.spec_from_entry(entry)
    }

    pub fn natural_linewidth_mhz(&self, label: &str) -> Result<f64> {
        self.manifolds
            .iter()
            .find(|m| m.label.eq_ignore_ascii_case(label))
            .map(|m| m.natural_linewidth_mhz)
            .ok_or_else(|| Error::structural(format!("unknown manifold '{label}'")))
    }

    /// Ground, intermediate and doubly excited manifolds of the ladder, in that order.
    pub fn ladder(&self) -> Result<[ManifoldSpec; 3]> {
        Ok([
            self.manifold("5S1/2")?,
            self.manifold("5P3/2")?,
            self.manifold("5D5/2")?,
        ])
    }

    pub fn mass_kg(&self) -> f64 {
        self.species.mass_u * self.physical.atomic_mass_unit_kg
    }
}
