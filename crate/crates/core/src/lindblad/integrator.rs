//! Classical fourth-order Runge-Kutta with an embedded third-order
//! estimate and PI step-size control over flat complex vectors.
//!
//! The embedded weights `(1/6, 1/3, 1/3, 0, 1/6)` reuse `f(t + h, y_new)`,
//! which is also the first stage of the next step, so a step costs four
//! evaluations. The propagator keeps the RK4 stability interval
//! `|h lambda| <= 2 sqrt 2` on the imaginary axis, which is what limits the
//! step for Hamiltonians with a wide spectrum.

use crate::error::{KpoError, Result};
use crate::fockspace::C64;

// PI controller for an error estimate of local order four
const EXPO: f64 = 0.7 / 4.0;
const BETA: f64 = 0.4 / 4.0;
const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 5.0;
const MAX_SHRINK: f64 = 0.2;
const MAX_STEPS: usize = 200_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, calling `on_sample` at every
/// entry of `samples` (ascending, inside `[t0, t1]`) and `on_step` after every
/// accepted step. The local error per step is kept below
/// `tol * (1 + |y_i|)` component-wise, with `|.|` the l1 norm of a complex number.
pub fn integrate<F, S, A>(
    y: &mut [C64],
    t0: f64,
    t1: f64,
    samples: &[f64],
    tol: f64,
    mut rhs: F,
    mut on_sample: S,
    mut on_step: A,
) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    S: FnMut(usize, f64, &[C64]) -> Result<()>,
    A: FnMut(f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let mut k1 = vec![C64::default(); n];
    let mut k2 = vec![C64::default(); n];
    let mut k3 = vec![C64::default(); n];
    let mut k4 = vec![C64::default(); n];
    let mut k5 = vec![C64::default(); n];
    let mut tmp = vec![C64::default(); n];
    let mut y_new = vec![C64::default(); n];

    let mut stats = StepStats::default();
    let mut next = 0;
    let mut t = t0;
    while next < samples.len() && samples[next] <= t0 {
        on_sample(next, samples[next], y)?;
        next += 1;
    }
    if t1 <= t0 {
        return Ok(stats);
    }

    rhs(t, y, &mut k1);
    stats.rhs_evals += 1;
    let span = t1 - t0;
    let h_min = 1e-13 * span.max(1.0);
    let mut h = (1e-3 * span).min(1e-2);
    let mut err_prev: f64 = 1e-4;

    while t < t1 {
        let target = if next < samples.len() { samples[next].min(t1) } else { t1 };
        let remaining = target - t;
        let landing = h >= remaining * (1.0 - 1e-12);
        let h_try = if landing { remaining } else { h };

        let half = 0.5 * h_try;
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * half;
        }
        rhs(t + half, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * half;
        }
        rhs(t + half, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h_try;
        }
        rhs(t + h_try, &tmp, &mut k4);
        let sixth = h_try / 6.0;
        for i in 0..n {
            y_new[i] = y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * sixth;
        }
        rhs(t + h_try, &y_new, &mut k5);
        stats.rhs_evals += 4;

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = (k4[i] - k5[i]) * sixth;
            let size = y[i].l1_norm().max(y_new[i].l1_norm());
            err = err.max(e.l1_norm() / (tol * (1.0 + size)));
        }
        if !err.is_finite() {
            err = f64::MAX;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = if landing { target } else { t + h_try };
            y.copy_from_slice(&y_new);
            std::mem::swap(&mut k1, &mut k5);
            on_step(t, y)?;
            while landing && next < samples.len() && samples[next] <= t {
                on_sample(next, samples[next], y)?;
                next += 1;
            }
            let err_c = err.max(1e-10);
            let fac = (SAFETY * err_c.powf(-EXPO) * err_prev.powf(BETA)).clamp(MAX_SHRINK, MAX_GROWTH);
            err_prev = err_c;
            let proposal = h_try * fac;
            h = if landing { proposal.max(h) } else { proposal };
        } else {
            stats.rejected += 1;
            h = h_try * (SAFETY * err.powf(-EXPO)).clamp(MAX_SHRINK, 1.0);
        }
        if h < h_min || stats.accepted + stats.rejected > MAX_STEPS {
            return Err(KpoError::Stiffness { t, step: h });
        }
    }
    Ok(stats)
}
