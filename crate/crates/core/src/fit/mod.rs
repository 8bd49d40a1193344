mod engine;
mod models;

pub use engine::{
    fit_curve, least_squares, numeric_jacobian, FitResult, Problem, ResidualFn, GRADIENT_TOLERANCE, JACOBIAN_STEP,
    MAX_ITERATIONS, STEP_TOLERANCE,
};
pub use models::{
    cavity_reflection_model, doppler_absorption_model, fit_cavity_reflection, fit_doppler_absorption,
    fit_gaussian_line, fit_lifetime, gaussian_line_model, spectral_peak, DOPPLER_FIT_MAX_FIELD_MT, SIGNIFICANCE,
};
