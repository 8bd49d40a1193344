//! Fixed-step classical Runge-Kutta integration of small real systems.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<T: Real, const N: usize, F>(f: &mut F, t: T, y: &[T; N], dt: T) -> [T; N]
where
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let half = dt / T::lit(2.0);
    let add = |a: &[T; N], k: &[T; N], h: T| -> [T; N] { std::array::from_fn(|i| a[i] + k[i] * h) };
    let k1 = f(t, y);
    let k2 = f(t + half, &add(y, &k1, half));
    let k3 = f(t + half, &add(y, &k2, half));
    let k4 = f(t + dt, &add(y, &k3, dt));
    let sixth = dt / T::lit(6.0);
    std::array::from_fn(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]) * sixth)
}

/// Integrates from `t0` to `t1` in `steps` equal steps. `observe` sees every
/// accepted state including the initial one.
pub fn integrate<T: Real, const N: usize, F, O>(
    f: &mut F,
    y0: [T; N],
    t0: T,
    t1: T,
    steps: usize,
    mut observe: O,
) -> Result<[T; N]>
where
    F: FnMut(T, &[T; N]) -> [T; N],
    O: FnMut(T, &[T; N]),
{
    if steps == 0 {
        return Err(Error::domain("integration needs at least one step"));
    }
    let dt = (t1 - t0) / T::from_usize(steps).unwrap_or_else(T::one);
    let mut y = y0;
    observe(t0, &y);
    for k in 0..steps {
        let t = t0 + dt * T::from_usize(k).unwrap_or_else(T::zero);
        y = rk4_step(f, t, &y, dt);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "state became non-finite",
                format!("step {k} of {steps}, t = {}", (t + dt)),
            ));
        }
        observe(t + dt, &y);
    }
    Ok(y)
}

/// Number of equal steps covering `span` with steps no longer than `dt_max`.
pub fn steps_for(span: f64, dt_max: f64) -> usize {
    ((span / dt_max).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let y = integrate(&mut f, [1.0], 0.0, 1.0, 100, |_, _| {}).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_in_f32() {
        let mut f = |_t: f32, y: &[f32; 2]| [y[1], -y[0]];
        let y = integrate(&mut f, [1.0, 0.0], 0.0, std::f32::consts::PI, 400, |_, _| {}).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn fourth_order_convergence() {
        let mut f = |t: f64, y: &[f64; 1]| [y[0] * t.cos()];
        let exact = 2.0f64.sin().exp();
        let e1 = (integrate(&mut f, [1.0], 0.0, 2.0, 20, |_, _| {}).unwrap()[0] - exact).abs();
        let e2 = (integrate(&mut f, [1.0], 0.0, 2.0, 40, |_, _| {}).unwrap()[0] - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order > 3.7 && order < 4.3, "{order}");
    }
}
