//! Lyapunov series and Razumikhin audits over recorded trajectories.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::history::{HistoryBuffer, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovAudit {
    pub lambda: f64,
    /// `(t, e^{lambda (t - t0)} V(x(t)))`, one entry per trajectory sample.
    pub series: Vec<(f64, f64)>,
    pub sup: f64,
    /// Earliest time at which `sup` is attained.
    pub sup_time: f64,
    /// The supremum sits at the final sample: the weight outgrows the decay,
    /// so `lambda` is too large for this run.
    pub lambda_too_large: bool,
}

/// Weighted Lyapunov series `w(t) = e^{lambda (t - t0)} V(x(t))`.
pub fn lyapunov_trace<V>(traj: &HistoryBuffer, v: V, lambda: f64, t0: f64) -> LyapunovAudit
where
    V: Fn(&[f64]) -> f64,
{
    let series: Vec<(f64, f64)> = traj
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, (lambda * (t - t0)).exp() * v(traj.sample(i, Side::Right))))
        .collect();
    let (mut sup, mut sup_index) = (f64::NEG_INFINITY, 0);
    for (i, &(_, w)) in series.iter().enumerate() {
        if w > sup {
            sup = w;
            sup_index = i;
        }
    }
    let sup_time = series.get(sup_index).map_or(f64::NAN, |s| s.0);
    let lambda_too_large = series.len() > 1
        && sup_index == series.len() - 1
        && sup_time > t0;
    LyapunovAudit {
        lambda,
        series,
        sup,
        sup_time,
        lambda_too_large,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSpec {
    pub q: f64,
    pub tau: f64,
    /// Accepted excess of the finite-difference rate over the bound,
    /// relative to `V(x(t))`. An `O(dt)` value such as `10 dt` absorbs the
    /// forward-difference error.
    pub tolerance: f64,
    /// Audit only steps starting in `[from, to]`.
    pub span: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RazumikhinViolation {
    pub time: f64,
    pub rate_estimate: f64,
    pub bound: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RazumikhinAudit {
    /// Sample indices at which `q V(x(t)) >= max_{s in [-tau, 0]} V(x(t+s))`.
    pub active_steps: Vec<usize>,
    pub violations: Vec<RazumikhinViolation>,
}

impl RazumikhinAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the Razumikhin-conditioned rate bound `D+V <= bound(t, V)` at
/// every accepted step whose delay window is recorded.
///
/// The window maximum is taken over stored samples only (both limits at a
/// jump). `D+V` is the forward difference from the right value at `t_j` to
/// the left value at `t_{j+1}`, so jumps never enter the estimate.
pub fn razumikhin_audit<V, B>(traj: &HistoryBuffer, v: V, spec: &AuditSpec, bound: B) -> RazumikhinAudit
where
    V: Fn(&[f64]) -> f64,
    B: Fn(f64, f64) -> f64,
{
    let times = traj.times();
    let mut audit = RazumikhinAudit::default();
    let Some(t_min) = traj.t_min() else {
        return audit;
    };
    let peak: Vec<f64> = (0..traj.len())
        .map(|i| v(traj.sample(i, Side::Left)).max(v(traj.sample(i, Side::Right))))
        .collect();

    // Indices in the window with decreasing `peak`.
    let mut window: VecDeque<usize> = VecDeque::new();
    for j in 0..times.len() {
        while window.back().is_some_and(|&i| peak[i] <= peak[j]) {
            window.pop_back();
        }
        window.push_back(j);
        let t = times[j];
        while window.front().is_some_and(|&i| times[i] < t - spec.tau) {
            window.pop_front();
        }
        if j + 1 == times.len() || t - spec.tau < t_min {
            continue;
        }
        if let Some((from, to)) = spec.span {
            if t < from || t > to {
                continue;
            }
        }
        let value = v(traj.sample(j, Side::Right));
        let window_max = peak[*window.front().expect("window holds j")];
        if spec.q * value < window_max {
            continue;
        }
        audit.active_steps.push(j);
        let next = v(traj.sample(j + 1, Side::Left));
        let rate_estimate = (next - value) / (times[j + 1] - t);
        let limit = bound(t, value);
        if rate_estimate - limit > spec.tolerance * value {
            audit.violations.push(RazumikhinViolation {
                time: t,
                rate_estimate,
                bound: limit,
                value,
            });
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::Interpolation;

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> HistoryBuffer {
        let mut buf = HistoryBuffer::new(1, Interpolation::Linear);
        let n = (t_end / dt).round() as usize;
        for i in 0..=n {
            let t = i as f64 * dt;
            buf.push(t, &[f(t)]).unwrap();
        }
        buf
    }

    fn square(x: &[f64]) -> f64 {
        x[0] * x[0]
    }

    #[test]
    fn constant_trajectory_series() {
        let buf = sampled(|_| 1.0, 1.0, 0.1);
        let audit = lyapunov_trace(&buf, square, 0.0, 0.0);
        assert_eq!(audit.series.len(), buf.len());
        assert!(audit.series.iter().all(|&(_, w)| w == 1.0));
        assert_eq!(audit.sup_time, 0.0);
        assert!(!audit.lambda_too_large);
    }

    #[test]
    fn lambda_beyond_decay_rate_is_flagged() {
        let buf = sampled(|t| (-0.5 * t).exp(), 10.0, 0.01);
        assert!(!lyapunov_trace(&buf, square, 0.5, 0.0).lambda_too_large);
        assert!(lyapunov_trace(&buf, square, 1.5, 0.0).lambda_too_large);
    }

    #[test]
    fn exact_decay_rate_passes() {
        let dt = 1e-3;
        let buf = sampled(|t| (-t).exp(), 2.0, dt);
        let spec = AuditSpec { q: 2.0, tau: 0.0, tolerance: 10.0 * dt, span: None };
        let audit = razumikhin_audit(&buf, square, &spec, |_, v| -2.0 * v);
        assert!(audit.is_clean());
        assert_eq!(audit.active_steps.len(), buf.len() - 1);
    }

    #[test]
    fn zero_bound_on_growth_is_violated() {
        let dt = 1e-2;
        let buf = sampled(|t| (0.3 * t).exp(), 1.0, dt);
        let spec = AuditSpec { q: 2.0, tau: 0.0, tolerance: 10.0 * dt, span: None };
        let audit = razumikhin_audit(&buf, square, &spec, |_, _| 0.0);
        assert_eq!(audit.violations.len(), buf.len() - 1);
    }

    #[test]
    fn window_excludes_dominated_steps() {
        // Decaying from 1 with tau = 1: q V(t) drops below the window max
        // once e^{-2t} < 1/q.
        let dt = 1e-2;
        let buf = sampled(|t| (-t).exp(), 3.0, dt);
        let spec = AuditSpec { q: 2.0, tau: 1.0, tolerance: 0.0, span: None };
        let audit = razumikhin_audit(&buf, square, &spec, |_, _| f64::NEG_INFINITY);
        // Only steps with t - tau >= 0 and e^{-2 tau} >= 1/2 qualify: none.
        assert!(audit.active_steps.is_empty());
    }
}
