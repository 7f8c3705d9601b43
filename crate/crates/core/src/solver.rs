//! Fixed-step RK4 for delay equations with a held input and state jumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{HistoryBuffer, Interpolation, Side};
use crate::model::{InitialHistory, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub interpolation: Interpolation,
    /// Width to which trigger crossings are refined.
    pub tol_event: f64,
    /// Largest number of events tolerated in any unit-time window.
    pub zeno_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 100.0,
            interpolation: Interpolation::Linear,
            tol_event: 1e-9,
            zeno_cap: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, model: &SystemModel) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("dt", "step must be positive and finite"));
        }
        if let Some(d) = model.min_positive_delay() {
            if self.dt > d {
                return Err(Error::validation(
                    "dt",
                    format!("step {} exceeds the smallest delay {d}", self.dt),
                ));
            }
        }
        if !(self.tol_event.is_finite() && self.tol_event > 0.0) {
            return Err(Error::validation("tol_event", "must be positive"));
        }
        if !self.horizon.is_finite() || self.horizon < model.t0() {
            return Err(Error::validation("horizon", "must be finite and >= t0"));
        }
        if self.zeno_cap == 0 {
            return Err(Error::validation("zeno_guard", "cap must be at least 1"));
        }
        Ok(())
    }
}

/// Builds the history buffer for `[t0 - tau, t0]` from the model's initial
/// function. Constant histories need only the two end samples.
pub fn initial_buffer(model: &SystemModel, solver: &SolverConfig) -> Result<HistoryBuffer> {
    let t0 = model.t0();
    let tau = model.tau();
    match model.initial() {
        InitialHistory::Constant(phi) => {
            check_dim(model, phi)?;
            HistoryBuffer::constant(t0 - tau, t0, phi, solver.interpolation)
        }
        InitialHistory::Function(_) => {
            let mut buffer = HistoryBuffer::new(model.dim(), solver.interpolation);
            let steps = (tau / solver.dt).ceil() as usize;
            for j in 0..=steps {
                let t = if j == steps { t0 } else { t0 - tau + j as f64 * solver.dt };
                let phi = model.initial().at(t);
                check_dim(model, &phi)?;
                if buffer.t_max().is_some_and(|last| t <= last) {
                    continue;
                }
                buffer.push(t, &phi)?;
            }
            Ok(buffer)
        }
    }
}

fn check_dim(model: &SystemModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::validation(
            "phi",
            format!("initial state has dimension {}, model has {}", x.len(), model.dim()),
        ));
    }
    Ok(())
}

/// Right-hand side `f(t, x_t) + B u` with delayed values read from `buffer`.
fn rhs(
    model: &SystemModel,
    buffer: &HistoryBuffer,
    t: f64,
    x: &[f64],
    u: &[f64],
    delayed: &mut [Vec<f64>],
    out: &mut [f64],
) -> Result<()> {
    for (slot, &d) in delayed.iter_mut().zip(model.delays()) {
        if d == 0.0 {
            slot.copy_from_slice(x);
        } else {
            buffer.evaluate_into(t - d, Side::Right, slot)?;
        }
    }
    model.drift(t, x, delayed, out);
    model.add_input(u, out);
    Ok(())
}

/// One classical RK4 step of length `dt` from `(t, x)` holding `u_held`.
///
/// `buffer` must cover `[t - tau, t]`; `dt` must not exceed the smallest
/// positive delay so that every delayed argument is already recorded.
pub fn rk4_step(
    model: &SystemModel,
    buffer: &HistoryBuffer,
    t: f64,
    x: &[f64],
    u_held: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let n = model.dim();
    if x.len() != n || u_held.len() != model.input_dim() {
        return Err(Error::State("state or input dimension mismatch".into()));
    }
    if !model.delays().is_empty() {
        let covered = match (buffer.t_min(), buffer.t_max()) {
            (Some(lo), Some(hi)) => {
                let slack = 1e-12 * t.abs().max(1.0);
                lo <= t - model.tau() + slack && hi >= t - slack
            }
            _ => false,
        };
        if !covered {
            return Err(Error::State(format!(
                "history does not cover [{}, {t}]",
                t - model.tau()
            )));
        }
    }

    let mut delayed = vec![vec![0.0; n]; model.delays().len()];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    rhs(model, buffer, t, x, u_held, &mut delayed, &mut k1)?;
    for i in 0..n {
        stage[i] = x[i] + 0.5 * dt * k1[i];
    }
    rhs(model, buffer, t + 0.5 * dt, &stage, u_held, &mut delayed, &mut k2)?;
    for i in 0..n {
        stage[i] = x[i] + 0.5 * dt * k2[i];
    }
    rhs(model, buffer, t + 0.5 * dt, &stage, u_held, &mut delayed, &mut k3)?;
    for i in 0..n {
        stage[i] = x[i] + dt * k3[i];
    }
    rhs(model, buffer, t + dt, &stage, u_held, &mut delayed, &mut k4)?;

    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Post-jump state `x- + B g(x-)`.
pub fn apply_impulse(model: &SystemModel, x_minus: &[f64]) -> Vec<f64> {
    let jump = model.apply_gain(&model.impulse_input(x_minus));
    x_minus.iter().zip(&jump).map(|(x, j)| x + j).collect()
}

/// Advances from `t_start` (the last recorded sample) to `t_end` with fixed
/// steps, shortening the final step to land on `t_end`. Every accepted step
/// is appended to `buffer` and reported to `observer`. Returns the final
/// state.
pub fn integrate_segment<F>(
    model: &SystemModel,
    buffer: &mut HistoryBuffer,
    t_start: f64,
    t_end: f64,
    u_held: &[f64],
    dt: f64,
    mut observer: F,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]),
{
    let mut x = buffer
        .last_state()
        .ok_or_else(|| Error::State("cannot integrate from an empty history".into()))?
        .to_vec();
    if buffer.t_max() != Some(t_start) {
        return Err(Error::State(format!(
            "segment starts at {t_start} but history ends at {:?}",
            buffer.t_max()
        )));
    }
    if t_end <= t_start {
        return Ok(x);
    }
    let mut t = t_start;
    let mut j = 0usize;
    while t < t_end {
        j += 1;
        let mut next = t_start + j as f64 * dt;
        if next >= t_end - 1e-9 * dt {
            next = t_end;
        }
        x = rk4_step(model, buffer, t, &x, u_held, next - t)?;
        buffer.push(next, &x)?;
        observer(next, &x);
        t = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn decay() -> SystemModel {
        SystemModel::new(1, vec![], Arc::new(|_, x, _, out| out[0] = -x[0]))
            .unwrap()
            .with_initial(0.0, InitialHistory::Constant(vec![1.0]))
    }

    fn start(model: &SystemModel) -> HistoryBuffer {
        initial_buffer(model, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn rk4_matches_exponential() {
        let m = decay();
        let buf = start(&m);
        let x = rk4_step(&m, &buf, 0.0, &[1.0], &[0.0], 0.1).unwrap();
        assert_abs_diff_eq!(x[0], (-0.1f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn rk4_constant_slope_from_delay_and_input() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, 0.0, 1.0).unwrap();
        let buf = start(&m);
        let x = rk4_step(&m, &buf, 0.0, &[1.0], &[-0.2], 0.1).unwrap();
        assert_abs_diff_eq!(x[0], 0.97, epsilon = 1e-15);
    }

    #[test]
    fn rk4_zero_stays_zero() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, 0.0, 0.0).unwrap();
        let buf = start(&m);
        assert_eq!(rk4_step(&m, &buf, 0.0, &[0.0], &[0.0], 0.1).unwrap(), vec![0.0]);
    }

    #[test]
    fn rk4_reports_coverage_gap() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, 0.0, 1.0).unwrap();
        let buf = HistoryBuffer::constant(-1.0, 0.0, &[1.0], Interpolation::Linear).unwrap();
        assert!(matches!(
            rk4_step(&m, &buf, 0.0, &[1.0], &[0.0], 0.1),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn impulse_examples() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, -0.293, 1.0).unwrap();
        assert_abs_diff_eq!(apply_impulse(&m, &[1.0])[0], 0.707, epsilon = 1e-15);
        assert_abs_diff_eq!(apply_impulse(&m, &[-2.0])[0], -1.414, epsilon = 1e-15);
        let none = SystemModel::scalar_delay(-0.1, 16.0, -0.2, 0.0, 1.0).unwrap();
        assert_eq!(apply_impulse(&none, &[0.3]), vec![0.3]);
    }

    #[test]
    fn segment_constant_slope_lands_on_end() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, 0.0, 1.0).unwrap();
        let mut buf = start(&m);
        let mut seen = 0;
        let x = integrate_segment(&m, &mut buf, 0.0, 1.0, &[-0.2], 0.3, |_, _| seen += 1).unwrap();
        assert_abs_diff_eq!(x[0], 0.7, epsilon = 1e-12);
        assert_eq!(buf.t_max(), Some(1.0));
        assert_eq!(seen, 4);
    }

    #[test]
    fn segment_exponential() {
        let m = decay();
        let mut buf = start(&m);
        let x = integrate_segment(&m, &mut buf, 0.0, 1.0, &[0.0], 0.01, |_, _| {}).unwrap();
        assert_abs_diff_eq!(x[0], (-1.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn empty_segment_is_a_no_op() {
        let m = decay();
        let mut buf = start(&m);
        let before = buf.clone();
        integrate_segment(&m, &mut buf, 0.0, 0.0, &[0.0], 0.01, |_, _| {}).unwrap();
        assert_eq!(buf, before);
    }

    #[test]
    fn config_validation() {
        let m = SystemModel::scalar_delay(-0.1, 16.0, -0.2, 0.0, 1.0).unwrap();
        let ok = SolverConfig::default();
        assert!(ok.validate(&m).is_ok());
        assert!(SolverConfig { dt: 20.0, ..ok }.validate(&m).is_err());
        assert!(SolverConfig { dt: -0.1, ..ok }.validate(&m).is_err());
        assert!(SolverConfig { tol_event: 0.0, ..ok }.validate(&m).is_err());
    }
}
