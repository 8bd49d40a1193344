//! Experiment-style optimisation of the pulse parameters.

mod ga;
mod grid;
mod local;
mod space;

pub use ga::{
    objective, run_ga, DriftModel, EvaluationRecord, GaSettings, GenerationSummary, ObjectiveValue,
    OptimizationTrace, ShotNoise, DEFAULT_RAMP_C_PER_ITERATION,
};
pub use grid::{grid_search, GridResult, MAX_GRID_POINTS};
pub use local::{nelder_mead, LocalMinimum};
pub use space::{ParamName, ParameterRange, ParameterSpace};
