use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use ladder_memory::atomic::{breit_rabi_curve, LadderSpectroscopy, Polarization};
use ladder_memory::cavity::{dual_resonance_map, reflection_response, summarize};
use ladder_memory::config::{ExperimentConfig, SpaceChoice};
use ladder_memory::fit::{
    fit_cavity_reflection, fit_doppler_absorption, fit_gaussian_line, fit_lifetime, FitResult,
};
use ladder_memory::io::{fmt_f64, read_xy, write_json, Provenance, Summary, Table};
use ladder_memory::memory::{
    bandwidth_scan, energy_scan, lifetime_scan, simulate_storage_retrieval, ScanPoint,
};
use ladder_memory::optimize::{grid_search, run_ga, OptimizationTrace};
use ladder_memory::vapour::{one_photon_spectrum, two_photon_spectrum};
use ladder_memory::{Error, Result};

use super::{Command, FitModel, OnOff, SpaceArg};

struct Out<'a> {
    cfg: &'a ExperimentConfig,
    command: &'static str,
    files: Vec<PathBuf>,
}

impl<'a> Out<'a> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.path(name);
        t.write(&p)?;
        self.files.push(p);
        Ok(())
    }

    fn summary<T: Serialize>(&mut self, name: &str, result: T) -> Result<()> {
        self.summary_for(self.cfg, name, result)
    }

    /// As `summary`, with provenance from a command-modified config.
    fn summary_for<T: Serialize>(&mut self, cfg: &ExperimentConfig, name: &str, result: T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, &Summary { provenance: Provenance::new(self.command, cfg), result })?;
        self.files.push(p);
        Ok(())
    }
}

pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let name = match command {
        Command::Config => "config",
        Command::Levels { .. } => "levels",
        Command::Lines { .. } => "lines",
        Command::Spectrum { .. } => "spectrum",
        Command::Cavity { .. } => "cavity",
        Command::Store { .. } => "store",
        Command::Scan { .. } => "scan",
        Command::Optimize { .. } => "optimize",
        Command::Fit { .. } => "fit",
    };
    let mut out = Out { cfg, command: name, files: Vec::new() };
    match command {
        Command::Config => {
            let p = out.path("config.json");
            write_json(&p, cfg)?;
            out.files.push(p);
        }
        Command::Levels { field, step_mt, manifolds } => levels(&mut out, field, *step_mt, manifolds)?,
        Command::Lines { field_mt, polarizations, window_ghz } => {
            lines(&mut out, field_mt.unwrap_or(cfg.atomic.field_mt), polarizations, *window_ghz)?
        }
        Command::Spectrum { one_photon, depth, field_mt, .. } => {
            spectrum(&mut out, *one_photon, *depth, field_mt.unwrap_or(cfg.atomic.field_mt))?
        }
        Command::Cavity { scan, .. } => cavity(&mut out, *scan)?,
        Command::Store { storage_ns, write_energy_nj, control_off } => {
            store(&mut out, *storage_ns, *write_energy_nj, *control_off)?
        }
        Command::Scan { lifetime, energy, .. } => scan(&mut out, *lifetime, *energy)?,
        Command::Optimize { drift, generations, space, grid } => optimize(&mut out, *drift, *generations, *space, *grid)?,
        Command::Fit { model, data, x, y } => fit(&mut out, *model, data, x.as_deref(), y.as_deref())?,
    }
    Ok(out.files)
}

fn parse_pol(s: &str) -> Result<Polarization> {
    s.parse().map_err(|e: Error| Error::config(e.to_string()))
}

fn levels(out: &mut Out, field: &[f64], step_mt: f64, manifolds: &[String]) -> Result<()> {
    let (start, stop) = (field[0], field[1]);
    if !(start >= 0.0) || !(stop >= start) {
        return Err(Error::config("--field needs 0 <= START <= STOP"));
    }
    if !(step_mt > 0.0) {
        return Err(Error::config("--step-mt must be positive"));
    }
    let n = ((stop - start) / step_mt + 1e-9).floor() as usize + 1;
    let fields: Vec<f64> = (0..n).map(|k| start + k as f64 * step_mt).collect();
    let data = out.cfg.atom_data()?;
    let ladder = data.ladder()?;
    let mut t = Table::new(&["field_mt", "manifold", "state_index", "energy_mhz"]);
    let mut discontinuities = Vec::new();
    for label in manifolds {
        let spec = data.manifold(label).map_err(|e| Error::config(e.to_string()))?;
        // ladder-wide labels when the manifold belongs to the ladder
        let offset: usize = ladder.iter().take_while(|m| m.label != spec.label).map(|m| m.dimension()).sum();
        let offset = if ladder.iter().any(|m| m.label == spec.label) { offset } else { 0 };
        let table = breit_rabi_curve(&spec, &fields)?;
        for (k, b) in table.fields_mt.iter().enumerate() {
            for (s, idx) in table.indices.iter().enumerate() {
                t.push(vec![
                    fmt_f64(*b),
                    spec.label.clone(),
                    (offset + idx).to_string(),
                    fmt_f64(table.energies_mhz[k][s]),
                ]);
            }
        }
        discontinuities.extend(table.discontinuities);
    }
    out.table("levels.csv", &t)?;
    out.summary("levels.json", json!({ "fields": fields.len(), "manifolds": manifolds, "discontinuities": discontinuities }))
}

fn lines(out: &mut Out, field_mt: f64, pols: &[String], window_ghz: f64) -> Result<()> {
    if pols.len() != 2 {
        return Err(Error::config("--polarizations takes `signal,control`"));
    }
    let (sp, cp) = (parse_pol(&pols[0])?, parse_pol(&pols[1])?);
    let spec = LadderSpectroscopy::new(&out.cfg.ladder()?, field_mt)?;
    let mem = spec.memory_line()?;
    let c = mem.detuning_ghz;
    let res = spec.resonances(sp, cp, (c - window_ghz, c + window_ghz), None);
    let mut t = Table::new(&[
        "two_photon_detuning_ghz",
        "relative_strength",
        "ground_index",
        "doubly_excited_index",
        "paths",
        "loss_channel",
    ]);
    for r in &res {
        t.push(vec![
            fmt_f64(r.detuning_ghz),
            fmt_f64(r.strength / mem.strength),
            r.ground.index.to_string(),
            r.doubly_excited.index.to_string(),
            r.paths.to_string(),
            u8::from(r.is_loss_channel).to_string(),
        ]);
    }
    out.table("lines.csv", &t)?;
    out.summary(
        "lines.json",
        json!({
            "field_mt": field_mt,
            "signal_polarization": sp,
            "control_polarization": cp,
            "memory_line": mem,
            "lines": res,
        }),
    )
}

fn spectrum(out: &mut Out, one_photon: bool, depth: Option<f64>, field_mt: f64) -> Result<()> {
    let cfg = out.cfg;
    let data = cfg.atom_data()?;
    let s = &cfg.spectrum;
    if one_photon {
        let mut vapour = cfg.vapour.clone();
        if depth.is_some() {
            vapour.optical_depth = depth;
        }
        let grid = s.signal_grid_ghz.values()?;
        let tr = one_photon_spectrum(&data, &vapour, field_mt, s.signal_polarization, &grid)?;
        let mut t = Table::new(&["signal_detuning_ghz", "transmission"]);
        for (x, y) in grid.iter().zip(&tr) {
            t.push_numbers(&[*x, *y]);
        }
        out.table("spectrum_one_photon.csv", &t)?;
        out.summary(
            "spectrum_one_photon.json",
            json!({
                "field_mt": field_mt,
                "polarization": s.signal_polarization,
                "optical_depth": vapour.depth(&data)?,
                "doppler_width_ghz": vapour.doppler_width_ghz(&data),
            }),
        )
    } else {
        let spec = LadderSpectroscopy::new(&data.ladder()?, field_mt)?;
        let grid = s.control_grid_ghz.values()?;
        let sp = two_photon_spectrum(
            &data,
            &spec,
            &cfg.vapour,
            s.signal_polarization,
            s.control_polarization,
            s.signal_detuning_ghz,
            &grid,
            s.geometry,
            depth.unwrap_or(s.control_depth),
        )?;
        let mut t = Table::new(&["control_detuning_ghz", "transmission"]);
        for (x, y) in grid.iter().zip(&sp.transmission) {
            t.push_numbers(&[*x, *y]);
        }
        out.table("spectrum_two_photon.csv", &t)?;
        let lines: Vec<_> = sp
            .lines
            .iter()
            .map(|(d, w)| json!({ "two_photon_detuning_ghz": d, "relative_strength": w }))
            .collect();
        out.summary(
            "spectrum_two_photon.json",
            json!({
                "field_mt": field_mt,
                "signal_detuning_ghz": s.signal_detuning_ghz,
                "lines": lines,
                "width": sp.width,
                "linear_absorption_warning": sp.linear_absorption_warning,
            }),
        )
    }
}

fn cavity(out: &mut Out, scan: bool) -> Result<()> {
    let cfg = out.cfg;
    let summary = summarize(&cfg.cavity)?;
    if scan {
        let grid = cfg.cavity_scan.detuning_grid_ghz.values()?;
        let r = reflection_response(&cfg.cavity, &grid)?;
        let mut t = Table::new(&["detuning_ghz", "reflected_power", "transmitted_power", "reflection_phase_rad"]);
        for k in 0..grid.len() {
            t.push_numbers(&[grid[k], r.reflection[k].norm_sqr(), r.transmission[k].norm_sqr(), r.reflection[k].arg()]);
        }
        out.table("cavity_scan.csv", &t)?;
        out.summary("cavity_scan.json", json!({ "params": cfg.cavity, "summary": summary }))
    } else {
        let s = &cfg.cavity_scan;
        let sg = s.map_signal_grid_ghz.values()?;
        let cg = s.map_control_grid_ghz.values()?;
        let map = dual_resonance_map(&cfg.cavity, &sg, &cg, s.map_shift_ghz)?;
        let mut t = Table::new(&["signal_detuning_ghz", "control_detuning_ghz", "buildup_product"]);
        for (i, a) in sg.iter().enumerate() {
            for (j, b) in cg.iter().enumerate() {
                t.push_numbers(&[*a, *b, map.values[i][j]]);
            }
        }
        out.table("cavity_resmap.csv", &t)?;
        out.summary(
            "cavity_resmap.json",
            json!({
                "params": cfg.cavity,
                "summary": summary,
                "shift_ghz": map.shift_ghz,
                "pairs": map.pairs,
                "dual_resonant": map.resonant_pairs(s.dual_resonance_tolerance_ghz),
            }),
        )
    }
}

fn store(out: &mut Out, storage_ns: Option<f64>, write_energy: Option<f64>, control_off: bool) -> Result<()> {
    let cfg = out.cfg;
    let mut p = cfg.pulses;
    if let Some(t) = storage_ns {
        p = p.with_storage_time(t);
    }
    if let Some(e) = write_energy {
        p = p.with_write_energy(e);
    }
    if control_off {
        p.write.energy = 0.0;
        p.read.energy = 0.0;
    }
    let r = simulate_storage_retrieval(&cfg.memory_config(), &p)?;
    let mut t = Table::new(&["time_ns", "output_flux_per_ns", "reference_flux_per_ns"]);
    for k in 0..r.time_grid_ns.len() {
        t.push_numbers(&[r.time_grid_ns[k], r.output_flux[k], r.reference_flux[k]]);
    }
    out.table("store_trace.csv", &t)?;
    out.summary(
        "store_summary.json",
        json!({
            "pulses": p,
            "storage_time_ns": r.storage_time_ns,
            "reference_counts": r.reference_counts,
            "leak_counts": r.leak_counts,
            "retrieved_counts": r.retrieved_counts,
            "background_counts": r.background_counts,
            "count_ratio": r.count_ratio(),
            "internal_efficiency": r.internal_efficiency,
            "total_efficiency": r.total_efficiency,
            "snr_db": r.snr_db,
            "leak_window_end_ns": r.leak_window_end_ns,
            "ledger": r.ledger,
            "convergence_delta": r.convergence_delta,
        }),
    )
}

fn scan_table(x_name: &str, points: &[ScanPoint]) -> Table {
    let mut t = Table::new(&[
        x_name,
        "total_efficiency",
        "internal_efficiency",
        "retrieved_counts",
        "reference_counts",
        "snr_db",
    ]);
    for p in points {
        t.push_numbers(&[p.x, p.total_efficiency, p.internal_efficiency, p.retrieved_counts, p.reference_counts, p.snr_db]);
    }
    t
}

fn scan(out: &mut Out, lifetime: bool, energy: bool) -> Result<()> {
    let cfg = out.cfg;
    let mem = cfg.memory_config();
    if lifetime {
        let pts = lifetime_scan(&mem, &cfg.pulses, &cfg.scans.storage_time_ns.values()?)?;
        out.table("scan_lifetime.csv", &scan_table("storage_time_ns", &pts))?;
        out.summary("scan_lifetime.json", json!({ "points": pts.len(), "decay": mem.decay_params() }))
    } else if energy {
        let pts = energy_scan(&mem, &cfg.pulses, &cfg.scans.write_energy_nj.values()?)?;
        let best = pts.iter().max_by(|a, b| a.total_efficiency.total_cmp(&b.total_efficiency));
        out.table("scan_energy.csv", &scan_table("write_energy_nj", &pts))?;
        out.summary("scan_energy.json", json!({ "points": pts.len(), "optimum_write_energy_nj": best.map(|p| p.x) }))
    } else {
        let pts = bandwidth_scan(&mem, &cfg.pulses, &cfg.scans.signal_fwhm_ns, cfg.scans.bandwidth_max_evaluations)?;
        let mut t = Table::new(&[
            "signal_fwhm_ns",
            "total_efficiency",
            "internal_efficiency",
            "write_delay_ns",
            "write_fwhm_ns",
            "read_fwhm_ns",
            "write_energy_nj",
            "read_write_ratio",
            "two_photon_detuning_ghz",
        ]);
        for p in &pts {
            let s = &p.settings;
            t.push_numbers(&[
                p.signal_fwhm_ns,
                p.total_efficiency,
                p.internal_efficiency,
                s.write_delay_ns,
                s.write_fwhm_ns,
                s.read_fwhm_ns,
                s.write_energy_nj,
                s.read_write_ratio,
                s.two_photon_detuning_ghz,
            ]);
        }
        out.table("scan_bandwidth.csv", &t)?;
        out.summary("scan_bandwidth.json", &pts)
    }
}

fn trace_tables(tr: &OptimizationTrace) -> (Table, Table) {
    let mut h = vec!["iteration".to_string(), "individual".to_string()];
    h.extend(tr.parameter_names.iter().cloned());
    h.extend(["objective".to_string(), "drift_ghz".to_string(), "fault".to_string()]);
    let mut evals = Table::new(&h);
    for e in &tr.evaluations {
        let mut row = vec![e.iteration.to_string(), e.individual.to_string()];
        row.extend(e.parameters.iter().map(|v| fmt_f64(*v)));
        row.extend([fmt_f64(e.objective), fmt_f64(e.drift_ghz), e.fault.clone().unwrap_or_default()]);
        evals.push(row);
    }
    let mut h: Vec<String> = ["iteration", "drift_ghz", "best_objective", "mean_objective", "best_so_far"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(tr.parameter_names.iter().map(|n| format!("best_{n}")));
    let mut gens = Table::new(&h);
    for g in &tr.generations {
        let mut row = vec![g.iteration as f64, g.drift_ghz, g.best_objective, g.mean_objective, g.best_so_far];
        row.extend(&g.best_parameters);
        gens.push_numbers(&row);
    }
    (evals, gens)
}

fn optimize(out: &mut Out, drift: Option<OnOff>, generations: Option<usize>, space: Option<SpaceArg>, grid: bool) -> Result<()> {
    let mut cfg = out.cfg.clone();
    if let Some(d) = drift {
        cfg.optimizer.drift.enabled = d == OnOff::On;
    }
    if let Some(g) = generations {
        cfg.optimizer.ga.generations = g;
    }
    match space {
        Some(SpaceArg::Full) => cfg.optimizer.space = SpaceChoice::Full,
        Some(SpaceArg::EnergyDetuning) => cfg.optimizer.space = SpaceChoice::EnergyDetuning,
        None => {}
    }
    let space = cfg.parameter_space()?;
    let mem = cfg.memory_config();
    let tr = run_ga(&space, &mem, &cfg.optimizer.drift, &cfg.optimizer.ga, cfg.seed)?;
    let (evals, gens) = trace_tables(&tr);
    out.table("optimize_trace.csv", &evals)?;
    out.table("optimize_generations.csv", &gens)?;
    let best = tr.best().cloned();
    let mut oracle = None;
    if grid {
        if space.dimension() > 2 {
            return Err(Error::config("--grid needs a space of at most two parameters"));
        }
        let axes: Vec<Vec<f64>> = space.parameters.iter().map(|p| p.grid(cfg.optimizer.grid_points)).collect();
        let g = grid_search(&space, &mem, &axes)?;
        let mut h: Vec<String> = g.parameter_names.clone();
        h.push("objective".into());
        let mut t = Table::new(&h);
        let mut k = 0;
        let n1 = axes.get(1).map_or(1, Vec::len);
        for a in &axes[0] {
            for j in 0..n1 {
                let mut row = vec![*a];
                if let Some(b) = axes.get(1) {
                    row.push(b[j]);
                }
                row.push(g.values[k]);
                t.push_numbers(&row);
                k += 1;
            }
        }
        out.table("optimize_grid.csv", &t)?;
        oracle = Some(json!({
            "best_point": g.best_point,
            "best_value": g.best_value,
            "ga_fraction_of_grid": best.as_ref().map(|b| b.objective / g.best_value),
        }));
    }
    out.summary_for(
        &cfg,
        "optimize_summary.json",
        json!({
            "settings": tr.settings,
            "drift": tr.drift,
            "space": space.parameters,
            "parameter_names": tr.parameter_names,
            "evaluations": tr.evaluations.len(),
            "best": best,
            "grid_oracle": oracle,
        }),
    )
}

fn fit(out: &mut Out, model: FitModel, data: &Path, x: Option<&str>, y: Option<&str>) -> Result<()> {
    let cfg = out.cfg;
    let (xs, ys) = read_xy(data, x, y).map_err(|e| Error::config(format!("{}: {e}", data.display())))?;
    let (name, r): (&str, FitResult) = match model {
        FitModel::Cavity => ("cavity", fit_cavity_reflection(&xs, &ys, cfg.cavity.r1, cfg.cavity.r2)?),
        FitModel::Doppler => {
            let atoms = cfg.atom_data()?;
            let dw = cfg.vapour.doppler_width_ghz(&atoms);
            ("doppler", fit_doppler_absorption(&atoms.ladder()?, cfg.spectrum.signal_polarization, dw, &xs, &ys)?)
        }
        FitModel::Lifetime => ("lifetime", fit_lifetime(&xs, &ys, cfg.memory.spin_decay_mhz)?),
        FitModel::Line => ("line", fit_gaussian_line(&xs, &ys)?),
    };
    out.summary(&format!("fit_{name}.json"), json!({ "model": name, "data": data, "fit": r }))
}
