//! Damped two-line beat model of the storage efficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters of the decay model. Rates and frequencies are given as
/// ordinary frequencies (MHz); the model applies the `2 pi` itself where the
/// physics needs angular units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams<T = f64> {
    /// Natural linewidth of the doubly excited level, `gamma_m / 2 pi`.
    pub spin_decay_mhz: T,
    /// Gaussian dephasing width `nu'`.
    pub dephasing_width_mhz: T,
    /// Beat frequency `omega / 2 pi`.
    pub line_splitting_mhz: T,
    pub a: T,
    pub b: T,
}

impl Default for DecayParams<f64> {
    fn default() -> Self {
        DecayParams {
            spin_decay_mhz: 0.66,
            dephasing_width_mhz: 12.6,
            line_splitting_mhz: 171.0,
            a: 0.51,
            b: 0.038,
        }
    }
}

/// `exp(-gamma_m t) exp(-pi^2 nu'^2 t^2 / (4 ln 2))`, the non-oscillating envelope.
pub fn decay_envelope<T: Real>(t_ns: T, p: &DecayParams<T>) -> T {
    let gm = T::TAU() * p.spin_decay_mhz * T::lit(1e-3);
    let nu = p.dephasing_width_mhz * T::lit(1e-3);
    let pi2 = T::PI() * T::PI();
    (-gm * t_ns).exp() * (-pi2 * nu * nu * t_ns * t_ns / (T::lit(4.0) * T::LN_2())).exp()
}

/// `|A + B exp(i omega t)|^2`.
pub fn beat<T: Real>(t_ns: T, p: &DecayParams<T>) -> T {
    let w = T::TAU() * p.line_splitting_mhz * T::lit(1e-3);
    p.a * p.a + p.b * p.b + T::lit(2.0) * p.a * p.b * (w * t_ns).cos()
}

/// Storage efficiency after `t_ns`.
pub fn lifetime_model<T: Real>(t_ns: T, p: &DecayParams<T>) -> T {
    decay_envelope(t_ns, p) * beat(t_ns, p)
}

/// Amplitude factor applied to the spin wave after a storage time `t_ns`,
/// normalised to 1 at `t = 0` and excluding the exponential spin decay
/// (which the dynamics applies continuously). Its squared modulus times
/// `exp(-gamma_m t)` reproduces [`lifetime_model`]`/ (A + B)^2`.
pub fn dephasing_kernel(t_ns: f64, p: &DecayParams<f64>) -> num_complex::Complex64 {
    use num_complex::Complex64;
    let nu = p.dephasing_width_mhz * 1e-3;
    let gauss = (-std::f64::consts::PI.powi(2) * nu * nu * t_ns * t_ns / (8.0 * std::f64::consts::LN_2)).exp();
    let w = std::f64::consts::TAU * p.line_splitting_mhz * 1e-3;
    let sum = p.a + p.b;
    if sum <= 0.0 {
        return Complex64::new(gauss, 0.0);
    }
    (Complex64::new(p.a, 0.0) + Complex64::from_polar(p.b, w * t_ns)) * (gauss / sum)
}

/// First time at which `f(t) / f(0)` falls to `1/e`, located by bracketing
/// on a 0.01 ns grid and bisection.
pub fn one_over_e_time<F: Fn(f64) -> f64>(f: F, t_max_ns: f64) -> Result<f64> {
    let f0 = f(0.0);
    if !(f0 > 0.0) {
        return Err(Error::domain("model vanishes at t = 0"));
    }
    let target = f0 / std::f64::consts::E;
    let step = 0.01;
    let mut lo = 0.0;
    while lo < t_max_ns {
        let hi = lo + step;
        if f(hi) <= target {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m) > target {
                    a = m;
                } else {
                    b = m;
                }
                if b - a < 1e-12 {
                    break;
                }
            }
            return Ok(0.5 * (a + b));
        }
        lo = hi;
    }
    Err(Error::numerical("no 1/e crossing", format!("searched 0..{t_max_ns} ns")))
}

/// 1/e lifetime of the decay envelope. The beat term is excluded: it
/// modulates the curve by a few percent and would otherwise make the
/// lifetime depend on the beat phase.
pub fn envelope_lifetime(p: &DecayParams<f64>) -> Result<f64> {
    one_over_e_time(|t| decay_envelope(t, p), 1e4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_sum_squared() {
        let p = DecayParams::default();
        assert!((lifetime_model(0.0, &p) - 0.548f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn constant_limit() {
        let p = DecayParams { spin_decay_mhz: 0.0, dephasing_width_mhz: 0.0, b: 0.0, ..DecayParams::default() };
        for t in [0.0, 3.0, 50.0] {
            assert!((lifetime_model(t, &p) - 0.51f64.powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_reproduces_model() {
        let p = DecayParams::default();
        for t in [0.0, 1.3, 12.5, 40.0] {
            let k = dephasing_kernel(t, &p).norm_sqr();
            let gm = std::f64::consts::TAU * p.spin_decay_mhz * 1e-3;
            let expect = lifetime_model(t, &p) / (p.a + p.b).powi(2);
            assert!((k * (-gm * t).exp() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_in_f32() {
        let p = DecayParams::<f32> { spin_decay_mhz: 0.66, dephasing_width_mhz: 12.6, line_splitting_mhz: 171.0, a: 0.51, b: 0.038 };
        assert!((lifetime_model(12.5f32, &p) - 0.249).abs() < 2e-3);
    }
}
