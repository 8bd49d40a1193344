//! Single-objective genetic algorithm with NSGA-style selection, steering
//! the pulse parameters against the simulated count ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::ParameterSpace;
use crate::error::{Error, Result};
use crate::memory::{simulate_storage_retrieval, MemoryConfig};

/// Thermal drift of the cavity resonance comb: a ramp plus seeded jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftModel {
    pub enabled: bool,
    pub drift_rate_ghz_per_iteration: f64,
    pub noise_sd_ghz: f64,
}

/// Default temperature ramp per iteration (deg C).
pub const DEFAULT_RAMP_C_PER_ITERATION: f64 = 0.0025;

impl Default for DriftModel {
    /// Disabled; when enabled, a 0.0025 deg C per iteration ramp through
    /// the cavity's temperature tuning plus 5 MHz jitter.
    fn default() -> Self {
        DriftModel {
            enabled: false,
            drift_rate_ghz_per_iteration: DEFAULT_RAMP_C_PER_ITERATION
                * crate::cavity::CavityParams::<f64>::default().tuning_ghz_per_c,
            noise_sd_ghz: 0.005,
        }
    }
}

impl DriftModel {
    pub fn thermal_ramp(c_per_iteration: f64, tuning_ghz_per_c: f64, noise_sd_ghz: f64) -> Self {
        DriftModel {
            enabled: true,
            drift_rate_ghz_per_iteration: crate::cavity::temperature_shift(
                c_per_iteration,
                &crate::cavity::CavityParams { tuning_ghz_per_c, ..Default::default() },
            ),
            noise_sd_ghz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift_rate_ghz_per_iteration.is_finite() || !(self.noise_sd_ghz >= 0.0) {
            return Err(Error::domain("drift rate must be finite and noise sd >= 0"));
        }
        Ok(())
    }

    /// Cavity offset at `iteration`; a pure function of (iteration, seed).
    pub fn offset(&self, iteration: usize, seed: u64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let ramp = self.drift_rate_ghz_per_iteration * iteration as f64;
        if self.noise_sd_ghz == 0.0 {
            return ramp;
        }
        let mut rng = stream(seed, 0xd1f7, iteration as u64, 0);
        ramp + self.noise_sd_ghz * Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng)
    }
}

// independent, reproducible random stream for (seed, purpose, a, b)
fn stream(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ a.wrapping_mul(0xbf58_476d_1ce4_e5b9) ^ b);
    rng
}

/// Outcome of one objective evaluation. A failed simulation scores 0 and
/// keeps its error message, like a failed experimental shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub fault: Option<String>,
}

/// Multiplicative shot-noise jitter on the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoise {
    pub relative_sd: f64,
    pub seed: u64,
}

/// `C_ret / C_ref` at parameter vector `x` with the cavity comb shifted by
/// `drift_offset_ghz`. `noise` with `key` (iteration, individual) makes the
/// jitter reproducible.
pub fn objective(
    space: &ParameterSpace,
    config: &MemoryConfig,
    x: &[f64],
    drift_offset_ghz: f64,
    noise: Option<(ShotNoise, u64, u64)>,
) -> ObjectiveValue {
    if !space.contains(x) {
        return ObjectiveValue { value: 0.0, fault: Some("parameters outside the space bounds".into()) };
    }
    let run = || -> Result<f64> {
        let pulses = space.apply(x)?;
        let cfg = MemoryConfig { cavity_drift_ghz: config.cavity_drift_ghz + drift_offset_ghz, ..config.clone() };
        Ok(simulate_storage_retrieval(&cfg, &pulses)?.count_ratio())
    };
    match run() {
        Ok(mut v) => {
            if let Some((n, a, b)) = noise {
                let mut rng = stream(n.seed, 0x5407, a, b);
                let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng);
                v = (v * (1.0 + n.relative_sd * z)).max(0.0);
            }
            ObjectiveValue { value: v, fault: None }
        }
        Err(e) => ObjectiveValue { value: 0.0, fault: Some(e.to_string()) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_probability: f64,
    /// SBX distribution index.
    pub crossover_eta: f64,
    /// Per-gene mutation probability; `None` means `1 / dimension`.
    pub mutation_probability: Option<f64>,
    /// Polynomial mutation distribution index.
    pub mutation_eta: f64,
    pub shot_noise: Option<f64>,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population: 24,
            generations: 60,
            tournament_size: 2,
            crossover_probability: 0.9,
            crossover_eta: 15.0,
            mutation_probability: None,
            mutation_eta: 20.0,
            shot_noise: None,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 8 {
            return Err(Error::domain("population must be at least 8"));
        }
        if self.tournament_size < 1 || self.tournament_size > self.population {
            return Err(Error::domain("tournament size must lie in 1..=population"));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return Err(Error::domain("crossover probability must lie in [0, 1]"));
        }
        if let Some(m) = self.mutation_probability {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::domain("mutation probability must lie in [0, 1]"));
            }
        }
        if !(self.crossover_eta >= 0.0 && self.mutation_eta >= 0.0) {
            return Err(Error::domain("distribution indices must be >= 0"));
        }
        if let Some(s) = self.shot_noise {
            if !(s >= 0.0) {
                return Err(Error::domain("shot noise must be >= 0"));
            }
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub iteration: usize,
    pub individual: usize,
    pub parameters: Vec<f64>,
    pub objective: f64,
    pub drift_ghz: f64,
    pub fault: Option<String>,
}

/// Population state after one iteration (generation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub iteration: usize,
    pub drift_ghz: f64,
    pub best_objective: f64,
    pub mean_objective: f64,
    pub best_so_far: f64,
    pub best_parameters: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub seed: u64,
    pub settings: GaSettings,
    pub drift: DriftModel,
    pub parameter_names: Vec<String>,
    pub evaluations: Vec<EvaluationRecord>,
    pub generations: Vec<GenerationSummary>,
}

impl OptimizationTrace {
    pub fn best(&self) -> Option<&EvaluationRecord> {
        self.evaluations.iter().max_by(|a, b| a.objective.total_cmp(&b.objective))
    }
}

#[derive(Clone)]
struct Individual {
    x: Vec<f64>,
    value: f64,
}

/// Crowding distance in parameter space (normalised per coordinate);
/// boundary individuals get infinity.
fn crowding(pop: &[Individual], space: &ParameterSpace) -> Vec<f64> {
    let n = pop.len();
    let mut d = vec![0.0; n];
    for (j, r) in space.parameters.iter().enumerate() {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| pop[a].x[j].total_cmp(&pop[b].x[j]).then(a.cmp(&b)));
        d[idx[0]] = f64::INFINITY;
        d[idx[n - 1]] = f64::INFINITY;
        let span = r.max - r.min;
        for k in 1..n - 1 {
            d[idx[k]] += (pop[idx[k + 1]].x[j] - pop[idx[k - 1]].x[j]) / span;
        }
    }
    d
}

// objective first, crowding breaks ties
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

fn sbx(rng: &mut ChaCha8Rng, a: f64, b: f64, lo: f64, hi: f64, eta: f64) -> (f64, f64) {
    if (a - b).abs() < 1e-14 {
        return (a, b);
    }
    let u: f64 = rng.random();
    let beta = if u <= 0.5 { (2.0 * u).powf(1.0 / (eta + 1.0)) } else { (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0)) };
    let c1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
    let c2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
    (c1.clamp(lo, hi), c2.clamp(lo, hi))
}

fn polynomial_mutation(rng: &mut ChaCha8Rng, x: f64, lo: f64, hi: f64, eta: f64) -> f64 {
    let u: f64 = rng.random();
    let delta = if u < 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
    };
    (x + delta * (hi - lo)).clamp(lo, hi)
}

/// Runs the genetic algorithm.
///
/// Generation 0 holds the base point plus uniform random individuals. Each
/// later generation breeds offspring by tournament selection, SBX crossover
/// and polynomial mutation, then keeps the best `population` of parents and
/// offspring. With drift enabled every generation sees a new cavity offset,
/// so surviving parents are re-measured at it, as in the experiment.
/// Evaluations run in parallel but all random draws happen sequentially,
/// so the trace depends only on the seed.
pub fn run_ga(
    space: &ParameterSpace,
    config: &MemoryConfig,
    drift: &DriftModel,
    settings: &GaSettings,
    seed: u64,
) -> Result<OptimizationTrace> {
    space.validate()?;
    settings.validate()?;
    drift.validate()?;
    config.validate()?;
    let dim = space.dimension();
    let pm = settings.mutation_probability.unwrap_or(1.0 / dim as f64);
    let mut rng = stream(seed, 0x6a, 0, 0);
    let shot = settings.shot_noise.map(|s| ShotNoise { relative_sd: s, seed });

    let mut trace = OptimizationTrace {
        seed,
        settings: *settings,
        drift: *drift,
        parameter_names: space.names().iter().map(|s| s.to_string()).collect(),
        evaluations: Vec::new(),
        generations: Vec::new(),
    };

    let evaluate = |xs: &[Vec<f64>], iteration: usize, first_index: usize, trace: &mut OptimizationTrace| -> Vec<f64> {
        let offset = drift.offset(iteration, seed);
        let values: Vec<ObjectiveValue> = xs
            .par_iter()
            .enumerate()
            .map(|(k, x)| {
                let key = shot.map(|n| (n, iteration as u64, (first_index + k) as u64));
                objective(space, config, x, offset, key)
            })
            .collect();
        for (k, (x, v)) in xs.iter().zip(&values).enumerate() {
            trace.evaluations.push(EvaluationRecord {
                iteration,
                individual: first_index + k,
                parameters: x.clone(),
                objective: v.value,
                drift_ghz: offset,
                fault: v.fault.clone(),
            });
        }
        values.into_iter().map(|v| v.value).collect()
    };

    let mut xs: Vec<Vec<f64>> = vec![space.start()];
    while xs.len() < settings.population {
        let mut x: Vec<f64> = space.parameters.iter().map(|p| rng.random_range(p.min..=p.max)).collect();
        space.snap(&mut x);
        xs.push(x);
    }
    let values = evaluate(&xs, 0, 0, &mut trace);
    let mut pop: Vec<Individual> = xs.into_iter().zip(values).map(|(x, value)| Individual { x, value }).collect();
    let mut best_so_far = f64::NEG_INFINITY;
    summarize(&mut trace, &pop, 0, drift.offset(0, seed), &mut best_so_far);

    for gen in 1..=settings.generations {
        let crowd = crowding(&pop, space);
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut best = rng.random_range(0..pop.len());
            for _ in 1..settings.tournament_size {
                let c = rng.random_range(0..pop.len());
                if better((pop[c].value, crowd[c]), (pop[best].value, crowd[best])) {
                    best = c;
                }
            }
            best
        };
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(settings.population);
        while children.len() < settings.population {
            let (a, b) = (tournament(&mut rng), tournament(&mut rng));
            let mut c1 = pop[a].x.clone();
            let mut c2 = pop[b].x.clone();
            if rng.random::<f64>() < settings.crossover_probability {
                for (j, r) in space.parameters.iter().enumerate() {
                    if rng.random::<f64>() < 0.5 {
                        let (u, v) = sbx(&mut rng, c1[j], c2[j], r.min, r.max, settings.crossover_eta);
                        c1[j] = u;
                        c2[j] = v;
                    }
                }
            }
            for c in [&mut c1, &mut c2] {
                for (j, r) in space.parameters.iter().enumerate() {
                    if pm > 0.0 && rng.random::<f64>() < pm {
                        c[j] = polynomial_mutation(&mut rng, c[j], r.min, r.max, settings.mutation_eta);
                    }
                }
                space.snap(c);
            }
            children.push(c1);
            if children.len() < settings.population {
                children.push(c2);
            }
        }

        let offset = drift.offset(gen, seed);
        if drift.enabled {
            let parents: Vec<Vec<f64>> = pop.iter().map(|p| p.x.clone()).collect();
            let values = evaluate(&parents, gen, 0, &mut trace);
            for (p, v) in pop.iter_mut().zip(values) {
                p.value = v;
            }
        }
        let first = if drift.enabled { settings.population } else { 0 };
        let values = evaluate(&children, gen, first, &mut trace);
        pop.extend(children.into_iter().zip(values).map(|(x, value)| Individual { x, value }));

        let crowd = crowding(&pop, space);
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| {
            pop[b].value
                .total_cmp(&pop[a].value)
                .then(crowd[b].total_cmp(&crowd[a]))
                .then(a.cmp(&b))
        });
        pop = order.into_iter().take(settings.population).map(|i| pop[i].clone()).collect();
        summarize(&mut trace, &pop, gen, offset, &mut best_so_far);
    }
    Ok(trace)
}

fn summarize(trace: &mut OptimizationTrace, pop: &[Individual], iteration: usize, drift: f64, best_so_far: &mut f64) {
    let best = pop.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("non-empty population");
    *best_so_far = best_so_far.max(best.value);
    trace.generations.push(GenerationSummary {
        iteration,
        drift_ghz: drift,
        best_objective: best.value,
        mean_objective: pop.iter().map(|p| p.value).sum::<f64>() / pop.len() as f64,
        best_so_far: *best_so_far,
        best_parameters: best.x.clone(),
    });
}
