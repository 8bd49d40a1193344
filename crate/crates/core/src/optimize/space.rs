use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::PulseSet;

/// The tunable experiment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    /// Control carrier offset from the two-photon resonance (GHz).
    TwoPhotonDetuningGhz,
    WriteEnergyNj,
    ReadWriteRatio,
    /// Signal centre minus write centre (ns).
    SignalDelayNs,
    SignalFwhmNs,
    WriteFwhmNs,
    /// Added to the nominal storage time (ns).
    WriteReadDelayOffsetNs,
    ReadFwhmNs,
}

impl ParamName {
    pub const ALL: [ParamName; 8] = [
        ParamName::TwoPhotonDetuningGhz,
        ParamName::WriteEnergyNj,
        ParamName::ReadWriteRatio,
        ParamName::SignalDelayNs,
        ParamName::SignalFwhmNs,
        ParamName::WriteFwhmNs,
        ParamName::WriteReadDelayOffsetNs,
        ParamName::ReadFwhmNs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::TwoPhotonDetuningGhz => "two_photon_detuning_ghz",
            ParamName::WriteEnergyNj => "write_energy_nj",
            ParamName::ReadWriteRatio => "read_write_ratio",
            ParamName::SignalDelayNs => "signal_delay_ns",
            ParamName::SignalFwhmNs => "signal_fwhm_ns",
            ParamName::WriteFwhmNs => "write_fwhm_ns",
            ParamName::WriteReadDelayOffsetNs => "write_read_delay_offset_ns",
            ParamName::ReadFwhmNs => "read_fwhm_ns",
        }
    }

    /// Value of this parameter in a pulse set, relative to the nominal
    /// storage time where that applies.
    pub fn read(self, p: &PulseSet, nominal_storage_ns: f64) -> f64 {
        match self {
            ParamName::TwoPhotonDetuningGhz => p.write.carrier_detuning_ghz,
            ParamName::WriteEnergyNj => p.write.energy,
            ParamName::ReadWriteRatio => {
                if p.write.energy > 0.0 {
                    p.read.energy / p.write.energy
                } else {
                    0.0
                }
            }
            ParamName::SignalDelayNs => p.signal.center_ns - p.write.center_ns,
            ParamName::SignalFwhmNs => p.signal.fwhm_ns,
            ParamName::WriteFwhmNs => p.write.fwhm_ns,
            ParamName::WriteReadDelayOffsetNs => p.storage_time_ns() - nominal_storage_ns,
            ParamName::ReadFwhmNs => p.read.fwhm_ns,
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown parameter {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRange {
    pub name: ParamName,
    pub min: f64,
    pub max: f64,
    /// Values are snapped to `min + k * resolution`; 0 leaves them
    /// continuous.
    #[serde(default)]
    pub resolution: f64,
}

impl ParameterRange {
    pub fn new(name: ParamName, min: f64, max: f64, resolution: f64) -> Self {
        ParameterRange { name, min, max, resolution }
    }

    pub fn snap(&self, v: f64) -> f64 {
        let v = v.clamp(self.min, self.max);
        if self.resolution > 0.0 {
            let k = ((v - self.min) / self.resolution).round();
            (self.min + k * self.resolution).min(self.max)
        } else {
            v
        }
    }

    /// `n` evenly spaced values from `min` to `max`; a single point sits at
    /// `min`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.min],
            _ => (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Parameters under optimisation, applied on top of a base pulse set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    pub parameters: Vec<ParameterRange>,
    pub base: PulseSet,
}

impl ParameterSpace {
    pub fn new(parameters: Vec<ParameterRange>, base: PulseSet) -> Result<Self> {
        let s = ParameterSpace { parameters, base };
        s.validate()?;
        Ok(s)
    }

    /// All eight parameters around the default operating point.
    pub fn full(base: PulseSet) -> Self {
        use ParamName::*;
        let parameters = vec![
            ParameterRange::new(TwoPhotonDetuningGhz, -0.05, 0.05, 0.001),
            ParameterRange::new(WriteEnergyNj, 0.02, 0.6, 0.005),
            ParameterRange::new(ReadWriteRatio, 0.5, 3.0, 0.05),
            ParameterRange::new(SignalDelayNs, -2.0, 2.0, 0.05),
            ParameterRange::new(SignalFwhmNs, 0.8, 3.0, 0.05),
            ParameterRange::new(WriteFwhmNs, 0.5, 4.0, 0.05),
            ParameterRange::new(WriteReadDelayOffsetNs, -2.0, 2.0, 0.05),
            ParameterRange::new(ReadFwhmNs, 0.5, 5.0, 0.05),
        ];
        ParameterSpace { parameters, base }
    }

    /// Write energy against two-photon detuning.
    pub fn energy_detuning_slice(base: PulseSet) -> Self {
        let parameters = vec![
            ParameterRange::new(ParamName::WriteEnergyNj, 0.02, 0.6, 0.0),
            ParameterRange::new(ParamName::TwoPhotonDetuningGhz, -0.05, 0.05, 0.0),
        ];
        ParameterSpace { parameters, base }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parameters.is_empty() {
            return Err(Error::domain("parameter space is empty"));
        }
        for (i, p) in self.parameters.iter().enumerate() {
            if !(p.min < p.max) || !p.min.is_finite() || !p.max.is_finite() {
                return Err(Error::domain(format!("{}: need finite min < max", p.name)));
            }
            if !(p.resolution >= 0.0) {
                return Err(Error::domain(format!("{}: resolution must be >= 0", p.name)));
            }
            if self.parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::domain(format!("{} listed twice", p.name)));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.parameters.len()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.parameters.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension() && self.parameters.iter().zip(x).all(|(p, v)| *v >= p.min && *v <= p.max)
    }

    pub fn snap(&self, x: &mut [f64]) {
        for (p, v) in self.parameters.iter().zip(x.iter_mut()) {
            *v = p.snap(*v);
        }
    }

    /// The base point's values, snapped into the bounds.
    pub fn start(&self) -> Vec<f64> {
        let storage = self.base.storage_time_ns();
        self.parameters.iter().map(|p| p.snap(p.name.read(&self.base, storage))).collect()
    }

    /// Pulse set for a parameter vector. The write pulse stays where the
    /// base puts it; the signal and read pulses move relative to it.
    pub fn apply(&self, x: &[f64]) -> Result<PulseSet> {
        if x.len() != self.dimension() {
            return Err(Error::structural(format!(
                "parameter vector has {} entries, space has {}",
                x.len(),
                self.dimension()
            )));
        }
        let mut p = self.base;
        let base_ratio = ParamName::ReadWriteRatio.read(&self.base, 0.0);
        let mut ratio = base_ratio;
        let mut storage = self.base.storage_time_ns();
        for (r, &v) in self.parameters.iter().zip(x) {
            match r.name {
                ParamName::TwoPhotonDetuningGhz => {
                    p.write.carrier_detuning_ghz = v;
                    p.read.carrier_detuning_ghz = v;
                }
                ParamName::WriteEnergyNj => p.write.energy = v,
                ParamName::ReadWriteRatio => ratio = v,
                ParamName::SignalDelayNs => p.signal.center_ns = p.write.center_ns + v,
                ParamName::SignalFwhmNs => p.signal.fwhm_ns = v,
                ParamName::WriteFwhmNs => p.write.fwhm_ns = v,
                ParamName::WriteReadDelayOffsetNs => storage = self.base.storage_time_ns() + v,
                ParamName::ReadFwhmNs => p.read.fwhm_ns = v,
            }
        }
        p.read.energy = p.write.energy * ratio;
        Ok(p.with_storage_time(storage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_reproduces_base() {
        let base = PulseSet::default();
        let s = ParameterSpace::full(base);
        let p = s.apply(&s.start()).unwrap();
        assert!((p.write.energy - base.write.energy).abs() < 1e-12);
        assert!((p.read.energy - base.read.energy).abs() < 1e-9);
        assert!((p.storage_time_ns() - base.storage_time_ns()).abs() < 1e-12);
    }

    #[test]
    fn snapping() {
        let r = ParameterRange::new(ParamName::WriteEnergyNj, 0.0, 1.0, 0.25);
        assert_eq!(r.snap(0.3), 0.25);
        assert_eq!(r.snap(2.0), 1.0);
        assert_eq!(r.grid(1), vec![0.0]);
        assert_eq!(r.grid(3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn names_parse_back() {
        for n in ParamName::ALL {
            assert_eq!(n.as_str().parse::<ParamName>().unwrap(), n);
        }
    }
}
