//! Zeno diagnostics and the closed-form event recursion of the scalar
//! example.

use serde::{Deserialize, Serialize};

use crate::controller::{SimResult, Termination};
use crate::error::{Error, Result};
use crate::history::Side;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEvent {
    pub time: f64,
    pub state: f64,
    /// Gap from the previous event (or from `t0` for the first one).
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZenoOracle {
    pub events: Vec<OracleEvent>,
    /// Limit of the partial sums of the gaps.
    pub accumulation_time: f64,
    /// Events accumulate before `t_max`. The list then runs until the state
    /// underflows; beyond the resolution of `t` consecutive times coincide.
    pub accumulates: bool,
    /// `sigma0 = 0`: the rule is met at every update instant and no
    /// nontrivial crossing exists.
    pub degenerate: bool,
}

/// Event sequence of `x' = b + k x(t_i)` (delayed term frozen at the
/// constant initial value 1) under `e^2 = sigma0 x^2`, starting from `x0`
/// at `t = 0`.
///
/// On each segment the slope is constant, so the event fires when
/// `x(t_i) - x(t) = sqrt(sigma0) x(t)`:
/// `x_{i+1} = x_i / (1 + sqrt(sigma0))` after a gap
/// `sqrt(sigma0) / (1 + sqrt(sigma0)) * x_i / (|b| + |k| x_i)`.
/// Valid while `t <= r`, hence `t_max <= r`.
pub fn zeno_recursion_oracle(
    x0: f64,
    b: f64,
    k: f64,
    sigma0: f64,
    r: f64,
    t_max: f64,
) -> Result<ZenoOracle> {
    if !(x0 > 0.0 && b < 0.0 && k < 0.0 && sigma0 >= 0.0 && t_max > 0.0 && t_max <= r) {
        return Err(Error::Precondition(format!(
            "oracle needs x0 > 0, b < 0, k < 0, sigma0 >= 0, 0 < t_max <= r \
             (got x0={x0}, b={b}, k={k}, sigma0={sigma0}, t_max={t_max}, r={r})"
        )));
    }
    if sigma0 == 0.0 {
        return Ok(ZenoOracle {
            events: Vec::new(),
            accumulation_time: 0.0,
            accumulates: false,
            degenerate: true,
        });
    }
    let s = sigma0.sqrt();
    let shrink = 1.0 / (1.0 + s);
    let lead = s / (1.0 + s);
    let gap_at = |x: f64| lead * x / (b.abs() + k.abs() * x);

    let mut events = Vec::new();
    let (mut t, mut x) = (0.0f64, x0);
    let mut accumulates = false;
    loop {
        let gap = gap_at(x);
        let next = t + gap;
        if next > t_max || gap == 0.0 || x == 0.0 {
            break;
        }
        // Below the resolution of `t` the times stall, but gaps and states
        // stay exact; keep going until the state underflows.
        if next == t {
            accumulates = true;
        }
        x *= shrink;
        t = next;
        events.push(OracleEvent { time: t, state: x, gap });
    }

    // Sum the full series; it converges geometrically.
    let mut total = 0.0f64;
    let mut xs = x0;
    loop {
        let g = gap_at(xs);
        if total + g == total || xs == 0.0 {
            break;
        }
        total += g;
        xs *= shrink;
    }
    Ok(ZenoOracle {
        events,
        accumulation_time: total,
        accumulates: accumulates || total <= t_max,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub compared: usize,
    pub max_time_deviation: f64,
    pub max_state_deviation: f64,
    /// `(simulated, oracle)` event counts when they differ.
    pub count_mismatch: Option<(usize, usize)>,
}

/// Deviations between the first `n` simulated events and the oracle.
pub fn compare_to_oracle(sim: &SimResult, oracle: &[OracleEvent], n: usize) -> OracleComparison {
    let sim_events: Vec<(f64, f64)> = sim
        .events
        .records
        .iter()
        .map(|r| (r.time, r.state_after[0]))
        .collect();
    compare_sequences(&sim_events, oracle, n)
}

pub fn compare_sequences(sim: &[(f64, f64)], oracle: &[OracleEvent], n: usize) -> OracleComparison {
    let compared = n.min(sim.len()).min(oracle.len());
    let mut max_t: f64 = 0.0;
    let mut max_x: f64 = 0.0;
    for ((t, x), o) in sim.iter().zip(oracle).take(compared) {
        max_t = max_t.max((t - o.time).abs());
        max_x = max_x.max((x - o.state).abs());
    }
    let (ns, no) = (sim.len().min(n), oracle.len().min(n));
    OracleComparison {
        compared,
        max_time_deviation: max_t,
        max_state_deviation: max_x,
        count_mismatch: (ns != no).then_some((ns, no)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZenoVerdict {
    ZenoSuspected,
    DwellBounded,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZenoReport {
    pub event_count: usize,
    pub min_gap: f64,
    pub mean_gap: f64,
    pub max_gap: f64,
    /// `x(t_{i+1}) / x(t_i)` for scalar runs, starting with `x(t_1) / x(t_0)`.
    pub contraction_ratios: Vec<f64>,
    /// Last update time plus a geometric extrapolation of the remaining gaps.
    pub accumulation_estimate: f64,
    pub guard_triggered: bool,
    pub verdict: ZenoVerdict,
}

/// Number of trailing gaps inspected for the decreasing-tail test.
const TAIL: usize = 10;

pub fn zeno_report(sim: &SimResult, dwell: Option<f64>) -> ZenoReport {
    let gaps: Vec<f64> = sim.events.records.iter().map(|r| r.gap).collect();
    let event_count = gaps.len();
    let (min_gap, max_gap, mean_gap) = if gaps.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            gaps.iter().copied().fold(f64::INFINITY, f64::min),
            gaps.iter().copied().fold(0.0, f64::max),
            gaps.iter().sum::<f64>() / event_count as f64,
        )
    };

    let mut contraction_ratios = Vec::new();
    if sim.trajectory.dim() == 1 {
        let mut prev = sim
            .trajectory
            .evaluate(sim.t0, Side::Right)
            .map(|v| v[0])
            .unwrap_or(f64::NAN);
        for r in &sim.events.records {
            contraction_ratios.push(r.state_after[0] / prev);
            prev = r.state_after[0];
        }
    }

    let elapsed: f64 = sim.t0 + gaps.iter().sum::<f64>();
    let tail_extra = match gaps.as_slice() {
        [.., a, b] if *b > 0.0 && b < a => b * (b / a) / (1.0 - b / a),
        _ => 0.0,
    };

    let guard_triggered = matches!(sim.termination, Termination::ZenoGuard { .. });
    let verdict = if guard_triggered && decreasing_tail(&gaps) {
        ZenoVerdict::ZenoSuspected
    } else if dwell.is_some_and(|h| !gaps.is_empty() && min_gap >= h - sim.solver.tol_event) {
        ZenoVerdict::DwellBounded
    } else {
        ZenoVerdict::Inconclusive
    };

    ZenoReport {
        event_count,
        min_gap,
        mean_gap,
        max_gap,
        contraction_ratios,
        accumulation_estimate: elapsed + tail_extra,
        guard_triggered,
        verdict,
    }
}

/// Strictly decreasing positive gaps over the tail. Trailing exact zeros
/// (the state reached zero, so updates repeat at one instant) are allowed.
fn decreasing_tail(gaps: &[f64]) -> bool {
    let positive_end = gaps.iter().rposition(|g| *g > 0.0).map_or(0, |i| i + 1);
    let positive = &gaps[..positive_end];
    if positive.len() < 3 {
        return false;
    }
    let tail = &positive[positive.len().saturating_sub(TAIL)..];
    tail.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn oracle_first_gaps() {
        let o = zeno_recursion_oracle(1.0, -0.1, -0.2, 0.36, 16.0, 10.0).unwrap();
        assert_abs_diff_eq!(o.events[0].gap, 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(o.events[0].state, 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(o.events[1].gap, 0.234375 / 0.225, epsilon = 1e-12);
        assert!(o.accumulates);
        assert!(o.accumulation_time < 10.0);
        assert!(o.events.len() > 500);
    }

    #[test]
    fn oracle_laws() {
        let (b, k, s0) = (-0.1f64, -0.2f64, 0.36f64);
        let o = zeno_recursion_oracle(1.0, b, k, s0, 16.0, 10.0).unwrap();
        let mut prev = 1.0;
        for e in &o.events {
            assert_eq!(e.state, prev * (1.0 / 1.6));
            let lhs = e.gap * (b.abs() + k.abs() * prev);
            assert_abs_diff_eq!(lhs, 0.375 * prev, epsilon = 1e-12);
            prev = e.state;
        }
    }

    #[test]
    fn oracle_degenerate_rule() {
        let o = zeno_recursion_oracle(1.0, -0.1, -0.2, 0.0, 16.0, 10.0).unwrap();
        assert!(o.degenerate && o.events.is_empty());
    }

    #[test]
    fn oracle_preconditions() {
        assert!(zeno_recursion_oracle(1.0, -0.1, -0.2, 0.36, 16.0, 20.0).is_err());
        assert!(zeno_recursion_oracle(-1.0, -0.1, -0.2, 0.36, 16.0, 10.0).is_err());
        assert!(zeno_recursion_oracle(1.0, 0.1, -0.2, 0.36, 16.0, 10.0).is_err());
    }

    #[test]
    fn oracle_against_itself() {
        let o = zeno_recursion_oracle(1.0, -0.1, -0.2, 0.36, 16.0, 10.0).unwrap();
        let seq: Vec<(f64, f64)> = o.events.iter().map(|e| (e.time, e.state)).collect();
        let cmp = compare_sequences(&seq, &o.events, 10);
        assert_eq!(cmp.max_time_deviation, 0.0);
        assert_eq!(cmp.max_state_deviation, 0.0);
        assert_eq!(cmp.count_mismatch, None);
    }

    #[test]
    fn tail_rule() {
        assert!(decreasing_tail(&[3.0, 2.0, 1.0, 0.5, 0.0, 0.0]));
        assert!(!decreasing_tail(&[1.0, 1.0, 1.0, 1.0]));
        assert!(!decreasing_tail(&[0.5, 1.0]));
    }
}
