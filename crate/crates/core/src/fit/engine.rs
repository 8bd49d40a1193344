//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with numeric
//! Jacobians.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative finite-difference step for the Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;
pub const STEP_TOLERANCE: f64 = 1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;
// singular values below this fraction of the largest mark a direction the
// data does not constrain
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub parameters: Vec<f64>,
    /// 1-sigma, from `s^2 (J^T J)^-1`; infinite for unidentifiable
    /// parameters.
    pub uncertainties: Vec<f64>,
    /// Sum of squared residuals.
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `J^T J` was rank deficient at the solution.
    pub singular: bool,
    /// Parameters with (near) null Jacobian directions.
    pub unidentifiable: Vec<String>,
    /// Quantities computed from the fitted parameters.
    pub derived: BTreeMap<String, f64>,
    /// SSR after every accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
}

impl FitResult {
    fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::domain(format!("no fit parameter named {name}")))
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.parameters[self.index(name)?])
    }

    pub fn uncertainty(&self, name: &str) -> Result<f64> {
        Ok(self.uncertainties[self.index(name)?])
    }

    pub fn is_identifiable(&self, name: &str) -> bool {
        !self.unidentifiable.iter().any(|n| n == name)
    }
}

/// Residual vector as a function of the parameters.
pub type ResidualFn<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a>;

/// A least-squares problem: named parameters with bounds and a residual
/// vector.
pub struct Problem<'a> {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    /// Inclusive bounds per parameter; infinite entries are open.
    pub bounds: Vec<(f64, f64)>,
    pub residuals: ResidualFn<'a>,
}

impl Problem<'_> {
    fn check(&self) -> Result<()> {
        let n = self.initial.len();
        if self.names.len() != n || self.bounds.len() != n {
            return Err(Error::structural("parameter names, values and bounds differ in length"));
        }
        for ((name, v), (lo, hi)) in self.names.iter().zip(&self.initial).zip(&self.bounds) {
            if !(lo < hi) {
                return Err(Error::domain(format!("empty bounds for {name}")));
            }
            if !(*v >= *lo && *v <= *hi) {
                return Err(Error::domain(format!("initial {name} = {v} lies outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn step_size(v: f64) -> f64 {
    JACOBIAN_STEP * v.abs().max(1e-3)
}

/// Central-difference Jacobian of `f` at `x` with relative step
/// [`JACOBIAN_STEP`], falling back to one-sided differences at bounds.
pub fn numeric_jacobian<F>(f: &F, x: &[f64], bounds: &[(f64, f64)]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let r0 = f(x)?;
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    for j in 0..x.len() {
        let h = step_size(x[j]);
        let (lo, hi) = bounds.get(j).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        let (up, down) = (x[j] + h <= hi, x[j] - h >= lo);
        let (rp, rm, span) = match (up, down) {
            (true, true) => {
                xp[j] += h;
                xm[j] -= h;
                (f(&xp)?, f(&xm)?, 2.0 * h)
            }
            (true, false) => {
                xp[j] += h;
                (f(&xp)?, r0.clone(), h)
            }
            (false, true) => {
                xm[j] -= h;
                (r0.clone(), f(&xm)?, h)
            }
            (false, false) => return Err(Error::domain("bounds narrower than the Jacobian step")),
        };
        for i in 0..r0.len() {
            jac[(i, j)] = (rp[i] - rm[i]) / span;
        }
    }
    Ok(jac)
}

fn clamp_to(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimises the sum of squared residuals by Levenberg-Marquardt.
///
/// Trial steps are projected onto the bounds. Accepted steps never increase
/// the SSR. Stops when the relative parameter change falls below
/// [`STEP_TOLERANCE`] or the gradient norm below [`GRADIENT_TOLERANCE`]
/// (both count as converged), or after [`MAX_ITERATIONS`] (not converged,
/// best point returned).
pub fn least_squares(problem: &Problem) -> Result<FitResult> {
    problem.check()?;
    let f = &problem.residuals;
    let n = problem.initial.len();
    let mut x = problem.initial.clone();
    let mut r = f(&x)?;
    if r.len() <= n {
        return Err(Error::domain(format!("{} residuals cannot determine {n} parameters", r.len())));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite residual at the initial point", format!("{x:?}")));
    }
    let mut cost = ssr(&r);
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = numeric_jacobian(f.as_ref(), &x, &problem.bounds)?;
        let rv = DVector::from_vec(r.clone());
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &rv;
        grad_norm = grad.norm();
        if grad_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * max_diag);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp_to(&mut trial, &problem.bounds);
            let moved = trial.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if moved <= STEP_TOLERANCE * (scale + STEP_TOLERANCE) {
                small_step = true;
                break;
            }
            match f(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) && ssr(&rt) <= cost => {
                    let rel = moved / (scale + STEP_TOLERANCE);
                    x = trial;
                    cost = ssr(&rt);
                    r = rt;
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    small_step = rel < STEP_TOLERANCE;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if small_step {
            converged = true;
            break;
        }
        if !accepted {
            // no downhill step at any damping: a minimum to working precision
            converged = true;
            break;
        }
    }

    let jac = numeric_jacobian(f.as_ref(), &x, &problem.bounds)?;
    grad_norm = grad_norm.min((jac.transpose() * DVector::from_vec(r.clone())).norm());
    let (uncertainties, unidentifiable) = covariance(&jac, cost, r.len(), &problem.names);
    Ok(FitResult {
        names: problem.names.clone(),
        parameters: x,
        uncertainties,
        residual_norm: cost,
        gradient_norm: grad_norm,
        converged,
        iterations,
        singular: !unidentifiable.is_empty(),
        unidentifiable,
        derived: BTreeMap::new(),
        history,
    })
}

/// Standard errors from the pseudo-inverse of `J^T J`, scaled by the
/// residual variance. Parameters loading on null directions get infinite
/// uncertainty and are listed as unidentifiable.
fn covariance(jac: &DMatrix<f64>, cost: f64, m: usize, names: &[String]) -> (Vec<f64>, Vec<String>) {
    let n = jac.ncols();
    // column scaling keeps the rank test independent of parameter units
    let scales: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
    let mut scaled = jac.clone();
    for j in 0..n {
        if scales[j] > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / scales[j]);
        }
    }
    let svd = scaled.svd(false, true);
    let smax = svd.singular_values.max();
    let v_t = svd.v_t.expect("requested V");
    let s2 = cost / (m - n) as f64;
    let mut unc = vec![0.0; n];
    let mut bad = vec![false; n];
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let row = v_t.row(k);
        if s <= RANK_TOLERANCE * smax || smax == 0.0 {
            for j in 0..n {
                if row[j].abs() > 1e-3 {
                    bad[j] = true;
                }
            }
            continue;
        }
        for j in 0..n {
            unc[j] += (row[j] / s).powi(2);
        }
    }
    let mut unidentifiable = Vec::new();
    let unc = (0..n)
        .map(|j| {
            if bad[j] || scales[j] == 0.0 {
                unidentifiable.push(names[j].clone());
                f64::INFINITY
            } else {
                (s2 * unc[j]).sqrt() / scales[j]
            }
        })
        .collect();
    (unc, unidentifiable)
}

/// Convenience wrapper for curve fits `y = model(x; theta)`.
pub fn fit_curve<'a, M>(
    model: M,
    xs: &'a [f64],
    ys: &'a [f64],
    names: &[&str],
    initial: &[f64],
    bounds: &[(f64, f64)],
) -> Result<FitResult>
where
    M: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + 'a,
{
    if xs.len() != ys.len() {
        return Err(Error::structural("x and y columns differ in length"));
    }
    let problem = Problem {
        names: names.iter().map(|s| s.to_string()).collect(),
        initial: initial.to_vec(),
        bounds: bounds.to_vec(),
        residuals: Box::new(move |p: &[f64]| {
            let m = model(xs, p)?;
            Ok(m.iter().zip(ys).map(|(a, b)| b - a).collect())
        }),
    };
    least_squares(&problem)
}
