#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use ladder_memory::config::ExperimentConfig;
use ladder_memory::Error;

mod commands;

/// Digital twin of a cavity-enhanced warm-vapour ladder memory.
#[derive(Debug, Parser)]
#[command(name = "ladder-memory", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment configuration (JSON); missing sections take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Atomic constants file; overrides the config and the environment.
    #[arg(long, global = true)]
    constants: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config override `dotted.path=value`, value parsed as JSON when
    /// possible. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the effective configuration.
    Config,
    /// Breit-Rabi energies of the ladder states against field.
    Levels {
        /// Field range start and stop (mT).
        #[arg(long, num_args = 2, value_names = ["START", "STOP"], default_values_t = [0.0, 300.0])]
        field: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        step_mt: f64,
        /// Comma separated manifold labels.
        #[arg(long, value_delimiter = ',', default_value = "5S1/2,5P3/2,5D5/2")]
        manifolds: Vec<String>,
    },
    /// Two-photon resonances at the configured field.
    Lines {
        #[arg(long)]
        field_mt: Option<f64>,
        /// Polarization pair `signal,control`.
        #[arg(long, value_delimiter = ',', default_value = "sigma-,sigma-")]
        polarizations: Vec<String>,
        /// Half width of the window around the memory line (GHz).
        #[arg(long, default_value_t = 3.0)]
        window_ghz: f64,
    },
    /// One- or two-photon transmission spectrum.
    #[command(group = ArgGroup::new("kind").required(true).args(["one_photon", "two_photon"]))]
    Spectrum {
        #[arg(long)]
        one_photon: bool,
        #[arg(long)]
        two_photon: bool,
        /// Optical depth (one-photon) or peak two-photon depth.
        #[arg(long)]
        depth: Option<f64>,
        #[arg(long)]
        field_mt: Option<f64>,
    },
    /// Cavity response or dual-resonance map.
    #[command(group = ArgGroup::new("kind").required(true).args(["scan", "resmap"]))]
    Cavity {
        #[arg(long)]
        scan: bool,
        #[arg(long)]
        resmap: bool,
    },
    /// One storage and retrieval run with its reference pulse.
    Store {
        #[arg(long)]
        storage_ns: Option<f64>,
        #[arg(long)]
        write_energy_nj: Option<f64>,
        /// Switch both control pulses off.
        #[arg(long)]
        control_off: bool,
    },
    /// Efficiency scans.
    #[command(group = ArgGroup::new("kind").required(true).args(["lifetime", "energy", "bandwidth"]))]
    Scan {
        #[arg(long)]
        lifetime: bool,
        #[arg(long)]
        energy: bool,
        #[arg(long)]
        bandwidth: bool,
    },
    /// Genetic optimisation of the pulse parameters.
    Optimize {
        #[arg(long, value_enum)]
        drift: Option<OnOff>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long, value_enum)]
        space: Option<SpaceArg>,
        /// Also run the exhaustive grid oracle (2-D spaces only).
        #[arg(long)]
        grid: bool,
    },
    /// Fit a model to two-column CSV data.
    Fit {
        #[arg(long, value_enum)]
        model: FitModel,
        data: PathBuf,
        /// Column holding x; defaults to the first.
        #[arg(long)]
        x: Option<String>,
        /// Column holding y; defaults to the second.
        #[arg(long)]
        y: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpaceArg {
    Full,
    EnergyDetuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitModel {
    Cavity,
    Doppler,
    Lifetime,
    Line,
}

/// Exit codes: 2 for configuration or input problems, 3 for numerical
/// failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } => 3,
        _ => 2,
    }
}

fn report(kind: &str, message: &str, code: u8) -> ExitCode {
    let obj = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{obj}");
    ExitCode::from(code)
}

/// Sets `a.b.c` in a JSON document. The value is taken as JSON if it parses
/// and as a string otherwise.
fn apply_override(doc: &mut serde_json::Value, spec: &str) -> ladder_memory::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::config(format!("override '{spec}' has an empty key")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::config(format!("override '{key}': '{part}' is not inside a section")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| serde_json::json!({}));
        if node.is_null() {
            *node = serde_json::json!({});
        }
    }
    Ok(())
}

fn load_config(g: &Global) -> ladder_memory::Result<ExperimentConfig> {
    let mut doc = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
        None => serde_json::json!({}),
    };
    for o in &g.overrides {
        apply_override(&mut doc, o)?;
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| Error::config(e.to_string()))?;
    if let Some(c) = &g.constants {
        cfg.atomic.constants_path = Some(c.clone());
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return report("usage", e.to_string().trim(), 2);
        }
    };
    let run = || -> ladder_memory::Result<Vec<PathBuf>> {
        let cfg = load_config(&cli.global)?;
        std::fs::create_dir_all(&cfg.output_dir)?;
        commands::run(&cli.command, &cfg)
    };
    match run() {
        Ok(files) => {
            let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::json!({ "outputs": files }));
            ExitCode::SUCCESS
        }
        Err(e) => report(e.kind(), &e.to_string(), exit_code(&e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_build_nested_keys() {
        let mut doc = serde_json::json!({});
        apply_override(&mut doc, "memory.cooperativity=100").unwrap();
        apply_override(&mut doc, "optimizer.space=energy_detuning").unwrap();
        assert_eq!(doc["memory"]["cooperativity"], 100);
        assert_eq!(doc["optimizer"]["space"], "energy_detuning");
        assert!(apply_override(&mut doc, "memory").is_err());
        assert!(apply_override(&mut doc, "memory.cooperativity.x=1").is_err());
    }

    #[test]
    fn numerical_failures_exit_3() {
        assert_eq!(exit_code(&Error::numerical("x", "y")), 3);
        assert_eq!(exit_code(&Error::config("x")), 2);
    }
}
