use nalgebra::DVector;

use super::solve::{check_impulse_controls, ControlFn};
use super::trajectory::{Segment, Trajectory};
use crate::error::{Error, Result};
use crate::operator::{jump_apply, ImpulsiveSystem};

/// Number of fixed steps covering `len` with nominal size `step`.
pub(crate) fn step_count(len: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let n = (len / step).round().max(1.0);
    if ((n * step) - len).abs() > 1e-6 * step.max(len) {
        return Err(Error::InvalidArgument(format!(
            "step {step} does not divide subinterval length {len}"
        )));
    }
    Ok(n as usize)
}

/// Classical fixed-step RK4 for `x' = A x + Omega u + kappa(t, x)` between
/// impulses, applying the jump map at each impulse instant.
pub fn dense_oracle(
    system: &ImpulsiveSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    step: f64,
) -> Result<Trajectory> {
    check_impulse_controls(system, v)?;
    let a = system.semigroup().generator();
    let omega = system.input_map();
    let kappa = system.nonlinearity();
    let rhs = |t: f64, x: &DVector<f64>| -> DVector<f64> { &a * x + omega * u(t) + kappa.eval(t, x) };
    rk4_impulsive(system, step, system.initial_state().clone(), rhs, |k, x| {
        let imp = &system.impulses()[k];
        jump_apply(&imp.jump, &imp.input, x, &v[k])
    })
}

pub(crate) fn rk4_impulsive(
    system: &ImpulsiveSystem,
    step: f64,
    x0: DVector<f64>,
    mut rhs: impl FnMut(f64, &DVector<f64>) -> DVector<f64>,
    mut jump: impl FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
) -> Result<Trajectory> {
    let breaks = system.breakpoints();
    let mut segments = Vec::with_capacity(breaks.len() - 1);
    let mut x = x0;
    for (k, w) in breaks.windows(2).enumerate() {
        let (t0, t1) = (w[0], w[1]);
        let n = step_count(t1 - t0, step)?;
        let h = (t1 - t0) / n as f64;
        let mut times = vec![t0];
        let mut states = vec![x.clone()];
        for i in 0..n {
            let t = t0 + h * i as f64;
            x = rk4_step(&mut rhs, t, &x, h);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dense oracle state"));
            }
            times.push(if i + 1 == n { t1 } else { t0 + h * (i + 1) as f64 });
            states.push(x.clone());
        }
        segments.push(Segment { times, states });
        if k + 2 < breaks.len() {
            x = jump(k, &x)?;
        }
    }
    Trajectory::new(segments)
}

pub(crate) fn rk4_step(
    rhs: &mut impl FnMut(f64, &DVector<f64>) -> DVector<f64>,
    t: f64,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = rhs(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = rhs(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}
