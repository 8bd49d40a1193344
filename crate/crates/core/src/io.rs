//! CSV tables and JSON summaries.
//!
//! Tables have a single header row of unit-suffixed names. Floats are
//! written in shortest round-trip form, so re-reading a table gives back
//! the exact values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A table of string cells under a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(headers: &[S]) -> Self {
        Table { headers: headers.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::structural(format!("no column '{name}' (have {})", self.headers.join(", "))))
    }

    /// Parses column `k` as numbers.
    pub fn numeric_column(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.headers.len() {
            return Err(Error::structural(format!("column {k} out of range")));
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r.get(k).ok_or_else(|| Error::structural(format!("row {} is short", i + 1)))?;
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::structural(format!("row {}: '{cell}' is not a number", i + 1)))
            })
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for r in &self.rows {
            if r.len() != self.headers.len() {
                return Err(Error::structural("row length differs from header"));
            }
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { headers, rows })
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Two numeric columns for curve fitting, chosen by name or defaulting to
/// the first two.
pub fn read_xy(path: impl AsRef<Path>, x: Option<&str>, y: Option<&str>) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = Table::read(path)?;
    if t.headers.len() < 2 {
        return Err(Error::structural("need at least two columns"));
    }
    let xi = x.map(|n| t.column_index(n)).transpose()?.unwrap_or(0);
    let yi = y.map(|n| t.column_index(n)).transpose()?.unwrap_or(1);
    Ok((t.numeric_column(xi)?, t.numeric_column(yi)?))
}

/// Provenance header attached to every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Provenance {
            toolkit: "ladder-memory".into(),
            version: TOOLKIT_VERSION.into(),
            command: command.into(),
            config_hash: config.hash(),
            seed: config.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<T: Serialize> {
    pub provenance: Provenance,
    pub result: T,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MAX, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(fmt_f64(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["x_ns", "y"]);
        t.push_numbers(&[0.1, 0.7]);
        t.push_numbers(&[1.0 / 3.0, -1e-17]);
        t.write(&path).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
        let (x, y) = read_xy(&path, None, Some("y")).unwrap();
        assert_eq!(x, vec![0.1, 1.0 / 3.0]);
        assert_eq!(y, vec![0.7, -1e-17]);
        assert!(read_xy(&path, Some("z"), None).is_err());
    }
}
