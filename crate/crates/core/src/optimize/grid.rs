use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ga::objective;
use super::space::ParameterSpace;
use crate::error::{Error, Result};
use crate::memory::MemoryConfig;

pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub parameter_names: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    /// Objective values, last axis fastest.
    pub values: Vec<f64>,
    pub best_point: Vec<f64>,
    pub best_value: f64,
}

/// Exhaustive, drift-free evaluation of the objective over the product of
/// `axes` (one per space parameter, at most two).
pub fn grid_search(space: &ParameterSpace, config: &MemoryConfig, axes: &[Vec<f64>]) -> Result<GridResult> {
    space.validate()?;
    let dim = space.dimension();
    if dim > 2 {
        return Err(Error::domain(format!("grid search handles at most 2 parameters, got {dim}")));
    }
    if axes.len() != dim || axes.iter().any(|a| a.is_empty()) {
        return Err(Error::domain("need one non-empty axis per parameter"));
    }
    let total: usize = axes.iter().map(Vec::len).product();
    if total > MAX_GRID_POINTS {
        return Err(Error::domain(format!("{total} grid points exceed the limit of {MAX_GRID_POINTS}")));
    }
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; dim];
            for j in (0..dim).rev() {
                x[j] = axes[j][k % axes[j].len()];
                k /= axes[j].len();
            }
            x
        })
        .collect();
    let values: Vec<f64> = points.par_iter().map(|x| objective(space, config, x, 0.0, None).value).collect();
    let (ibest, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty grid");
    Ok(GridResult {
        parameter_names: space.names().iter().map(|s| s.to_string()).collect(),
        axes: axes.to_vec(),
        best_point: points[ibest].clone(),
        best_value: values[ibest],
        values,
    })
}
