//! Closed-loop simulation under the four control regimes.
//!
//! * open loop: no feedback, no impulses;
//! * event only: `u = k(x(t_i))` refreshed whenever the trigger margin
//!   reaches zero, with a guard against accumulating events;
//! * impulsive only: `u = 0`, jumps `x+ = x- + B g(x-)` every `h`;
//! * hybrid: a natural event is accepted only if it arrives more than `h`
//!   after the previous update; otherwise the input is held until
//!   `t_i + h`, where an impulse fires and the input is refreshed from the
//!   post-jump state.
//!
//! The measurement error `e = x(t_i) - x(t)` is never integrated; it is
//! recomputed from the state stored at the last update.
//!
//! Event-triggered segments are integrated in offsets from the last update
//! time. When updates accumulate, successive gaps drop far below the
//! resolution of the absolute time; working in offsets (with a relative
//! bisection tolerance) keeps each gap and the state at each update exact
//! to working precision even after the absolute times have collapsed onto
//! one floating-point value.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{HistoryBuffer, Side};
use crate::model::SystemModel;
use crate::solver::{apply_impulse, initial_buffer, integrate_segment, rk4_step, SolverConfig};
use crate::trigger::{locate_crossing_with, trigger_margin, CrossingTolerance, TriggerRule};

/// Crossing width relative to the offset from the last update.
const REL_CROSSING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ControllerMode {
    OpenLoop,
    EventOnly,
    ImpulsiveOnly { dwell: f64 },
    Hybrid { dwell: f64 },
}

impl ControllerMode {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerMode::OpenLoop => "open_loop",
            ControllerMode::EventOnly => "event_only",
            ControllerMode::ImpulsiveOnly { .. } => "impulsive_only",
            ControllerMode::Hybrid { .. } => "hybrid",
        }
    }

    pub fn dwell(&self) -> Option<f64> {
        match self {
            ControllerMode::ImpulsiveOnly { dwell } | ControllerMode::Hybrid { dwell } => {
                Some(*dwell)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.dwell() {
            Some(h) if !(h.is_finite() && h > 0.0) => {
                Err(Error::validation("h", "dwell must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    FeedbackUpdate,
    ImpulsePlusUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    /// Time since the previous update, measured in segment offsets so that it
    /// stays meaningful below the resolution of `time`.
    pub gap: f64,
    pub kind: EventKind,
    /// Index of the trajectory sample holding this update.
    pub sample_index: usize,
    pub state_before: Vec<f64>,
    pub state_after: Vec<f64>,
    pub held_input_after: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
    /// Start of a final stretch in which the trigger never fired and no
    /// impulse was scheduled.
    pub quiescent_tail_from: Option<f64>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    ZenoGuard { time: f64, window_count: usize },
    Error { time: f64, message: String },
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub trajectory: HistoryBuffer,
    pub events: EventLog,
    pub mode: ControllerMode,
    pub solver: SolverConfig,
    pub t0: f64,
    /// Input held on `[t0, t_1)`.
    pub initial_input: Vec<f64>,
    pub termination: Termination,
}

impl SimResult {
    pub fn final_time(&self) -> f64 {
        self.trajectory.t_max().unwrap_or(self.t0)
    }

    pub fn feedback_updates(&self) -> usize {
        self.events.count(EventKind::FeedbackUpdate)
    }

    pub fn impulses(&self) -> usize {
        self.events.count(EventKind::ImpulsePlusUpdate)
    }

    /// Largest `|x|` (Euclidean) over samples with `t` in `[t_a, t_b]`,
    /// counting both limits at jumps.
    pub fn max_norm_on(&self, t_a: f64, t_b: f64) -> f64 {
        let traj = &self.trajectory;
        let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
        traj.times()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= t_a && t <= t_b)
            .map(|(i, _)| norm(traj.sample(i, Side::Left)).max(norm(traj.sample(i, Side::Right))))
            .fold(0.0, f64::max)
    }

    /// Input in effect from each sample onward (right-continuous), zero on
    /// the initial segment before `t0`.
    pub fn inputs_at_samples(&self) -> Vec<Vec<f64>> {
        let m = self.initial_input.len();
        let mut out = Vec::with_capacity(self.trajectory.len());
        let mut records = self.events.records.iter().peekable();
        let mut current = vec![0.0; m];
        for (i, &t) in self.trajectory.times().iter().enumerate() {
            if t == self.t0 {
                current = self.initial_input.clone();
            }
            while let Some(r) = records.peek() {
                if r.sample_index > i {
                    break;
                }
                current = r.held_input_after.clone();
                records.next();
            }
            out.push(current.clone());
        }
        out
    }
}

/// Input held from an update at state `x`.
pub fn held_input(model: &SystemModel, x_at_event: &[f64]) -> Vec<f64> {
    model.feedback(x_at_event)
}

/// `e = x(t_i) - x(t)`.
pub fn measurement_error(x_at_event: &[f64], x: &[f64]) -> Vec<f64> {
    x_at_event.iter().zip(x).map(|(a, b)| a - b).collect()
}

pub fn run_simulation(
    model: &SystemModel,
    rule: &TriggerRule,
    mode: ControllerMode,
    solver: &SolverConfig,
) -> Result<SimResult> {
    solver.validate(model)?;
    mode.validate()?;
    rule.validate()?;

    let mut runner = Runner::new(model, rule, mode, solver)?;
    let outcome = match mode {
        ControllerMode::OpenLoop => runner.run_open_loop(),
        ControllerMode::ImpulsiveOnly { dwell } => runner.run_impulsive(dwell),
        ControllerMode::EventOnly => runner.run_triggered(None),
        ControllerMode::Hybrid { dwell } => runner.run_triggered(Some(dwell)),
    };
    let termination = match outcome {
        Ok(t) => t,
        Err(e) => Termination::Error {
            time: runner.buffer.t_max().unwrap_or(model.t0()),
            message: e.to_string(),
        },
    };
    Ok(SimResult {
        trajectory: runner.buffer,
        events: runner.events,
        mode,
        solver: *solver,
        t0: model.t0(),
        initial_input: runner.initial_input,
        termination,
    })
}

struct Runner<'a> {
    model: &'a SystemModel,
    rule: &'a TriggerRule,
    solver: &'a SolverConfig,
    buffer: HistoryBuffer,
    events: EventLog,
    initial_input: Vec<f64>,
    window: VecDeque<f64>,
}

enum SegmentEnd {
    Update { anchor: f64, state: Vec<f64> },
    Stop(Termination),
}

impl<'a> Runner<'a> {
    fn new(
        model: &'a SystemModel,
        rule: &'a TriggerRule,
        mode: ControllerMode,
        solver: &'a SolverConfig,
    ) -> Result<Self> {
        let buffer = initial_buffer(model, solver)?;
        let x0 = buffer.last_state().expect("initial buffer is non-empty");
        let initial_input = match mode {
            ControllerMode::EventOnly | ControllerMode::Hybrid { .. } => held_input(model, x0),
            _ => vec![0.0; model.input_dim()],
        };
        Ok(Self {
            model,
            rule,
            solver,
            buffer,
            events: EventLog::default(),
            initial_input,
            window: VecDeque::new(),
        })
    }

    fn run_open_loop(&mut self) -> Result<Termination> {
        let zero = vec![0.0; self.model.input_dim()];
        integrate_segment(
            self.model,
            &mut self.buffer,
            self.model.t0(),
            self.solver.horizon,
            &zero,
            self.solver.dt,
            |_, _| {},
        )?;
        Ok(Termination::Horizon)
    }

    fn run_impulsive(&mut self, dwell: f64) -> Result<Termination> {
        let t0 = self.model.t0();
        let horizon = self.solver.horizon;
        let zero = vec![0.0; self.model.input_dim()];
        let count = ((horizon - t0) / dwell).floor() as usize;
        let mut t = t0;
        for j in 1..=count {
            let target = (t0 + j as f64 * dwell).min(horizon);
            let x_minus = integrate_segment(
                self.model,
                &mut self.buffer,
                t,
                target,
                &zero,
                self.solver.dt,
                |_, _| {},
            )?;
            let x_plus = apply_impulse(self.model, &x_minus);
            self.buffer.push_jump(&x_plus)?;
            self.log(target, target - t, EventKind::ImpulsePlusUpdate, x_minus, x_plus, zero.clone());
            t = target;
        }
        integrate_segment(self.model, &mut self.buffer, t, horizon, &zero, self.solver.dt, |_, _| {})?;
        Ok(Termination::Horizon)
    }

    fn run_triggered(&mut self, dwell: Option<f64>) -> Result<Termination> {
        let mut anchor = self.model.t0();
        let mut state = self.buffer.last_state().expect("non-empty").to_vec();
        let mut input = self.initial_input.clone();
        loop {
            match self.triggered_segment(anchor, &state, &input, dwell)? {
                SegmentEnd::Update { anchor: a, state: s } => {
                    input = held_input(self.model, &s);
                    self.events
                        .records
                        .last_mut()
                        .expect("update was logged")
                        .held_input_after = input.clone();
                    anchor = a;
                    state = s;
                    if let Some(stop) = self.zeno_guard(anchor) {
                        return Ok(stop);
                    }
                }
                SegmentEnd::Stop(t) => return Ok(t),
            }
        }
    }

    /// Integrates from the update at `anchor` until the next update or the
    /// horizon.
    fn triggered_segment(
        &mut self,
        anchor: f64,
        x_anchor: &[f64],
        input: &[f64],
        dwell: Option<f64>,
    ) -> Result<SegmentEnd> {
        let dt = self.solver.dt;
        let horizon = self.solver.horizon;
        let limit = horizon - anchor;
        let abs_time = |offset: f64| if offset == limit { horizon } else { anchor + offset };
        let tolerance = CrossingTolerance {
            abs: self.solver.tol_event,
            rel: REL_CROSSING_TOL,
            origin: 0.0,
        };

        let mut x = x_anchor.to_vec();
        let mut offset = 0.0;
        let mut margin_prev = self.margin(x_anchor, &x);
        let mut grid_base = 0.0;
        let mut steps = 0usize;
        // Hybrid: a crossing arrived within the dwell; hold until t_i + h.
        let mut impulse_pending = false;

        if limit <= 0.0 {
            return Ok(SegmentEnd::Stop(Termination::Horizon));
        }
        loop {
            let in_dwell = dwell.is_some_and(|h| offset < h);
            let boundary = match dwell {
                Some(h) if in_dwell => h.min(limit),
                _ => limit,
            };
            steps += 1;
            let mut next = grid_base + steps as f64 * dt;
            if next >= boundary - 1e-9 * dt {
                next = boundary;
            }
            let t_step = abs_time(offset);
            let x_next = rk4_step(self.model, &self.buffer, t_step, &x, input, next - offset)?;

            let mut margin_next = margin_prev;
            if !impulse_pending {
                margin_next = self.margin(x_anchor, &x_next);
                let crossed = margin_next < 0.0 || (margin_prev > 0.0 && margin_next <= 0.0);
                if crossed {
                    let s_star = {
                        let buffer = &self.buffer;
                        let model = self.model;
                        let x_start = &x;
                        locate_crossing_with(
                            |s| {
                                let xs = rk4_step(model, buffer, t_step, x_start, input, s - offset)?;
                                Ok(trigger_margin(&xs, &measurement_error(x_anchor, &xs), self.rule))
                            },
                            offset,
                            next,
                            tolerance,
                        )?
                    };
                    if in_dwell {
                        impulse_pending = true;
                    } else {
                        let x_event = if s_star == offset {
                            x.clone()
                        } else {
                            rk4_step(self.model, &self.buffer, t_step, &x, input, s_star - offset)?
                        };
                        let t_event = abs_time(s_star);
                        self.record_sample(t_event, &x_event)?;
                        self.log(
                            t_event,
                            s_star,
                            EventKind::FeedbackUpdate,
                            x_event.clone(),
                            x_event.clone(),
                            Vec::new(),
                        );
                        return Ok(SegmentEnd::Update { anchor: t_event, state: x_event });
                    }
                }
            }

            self.record_sample(abs_time(next), &x_next)?;
            x = x_next;
            offset = next;
            margin_prev = margin_next;

            if next == limit {
                if !in_dwell {
                    self.events.quiescent_tail_from = Some(anchor);
                }
                return Ok(SegmentEnd::Stop(Termination::Horizon));
            }
            if next == boundary && in_dwell {
                if impulse_pending {
                    let t_impulse = anchor + boundary;
                    let x_plus = apply_impulse(self.model, &x);
                    self.buffer.push_jump(&x_plus)?;
                    self.log(
                        t_impulse,
                        boundary,
                        EventKind::ImpulsePlusUpdate,
                        x.clone(),
                        x_plus.clone(),
                        Vec::new(),
                    );
                    return Ok(SegmentEnd::Update { anchor: t_impulse, state: x_plus });
                }
                // Dwell elapsed without a crossing: keep scanning on a grid
                // aligned with t_i + h.
                grid_base = boundary;
                steps = 0;
            }
        }
    }

    fn margin(&self, x_anchor: &[f64], x: &[f64]) -> f64 {
        trigger_margin(x, &measurement_error(x_anchor, x), self.rule)
    }

    /// Appends a sample, or overwrites the last one when the absolute time
    /// has not advanced at floating-point resolution.
    fn record_sample(&mut self, t: f64, x: &[f64]) -> Result<()> {
        if self.buffer.t_max() == Some(t) {
            self.buffer.replace_last(x)
        } else {
            self.buffer.push(t, x)
        }
    }

    fn log(
        &mut self,
        time: f64,
        gap: f64,
        kind: EventKind,
        state_before: Vec<f64>,
        state_after: Vec<f64>,
        held_input_after: Vec<f64>,
    ) {
        self.events.records.push(EventRecord {
            time,
            gap,
            kind,
            sample_index: self.buffer.len() - 1,
            state_before,
            state_after,
            held_input_after,
        });
    }

    fn zeno_guard(&mut self, t: f64) -> Option<Termination> {
        self.window.push_back(t);
        while self.window.front().is_some_and(|&f| f <= t - 1.0) {
            self.window.pop_front();
        }
        (self.window.len() > self.solver.zeno_cap).then_some(Termination::ZenoGuard {
            time: t,
            window_count: self.window.len(),
        })
    }
}
