//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys not listed in [`KEYS`] are rejected and every key may appear once.
//! Missing keys take the defaults of the builtin scalar example
//! (`b = -0.1`, `k = -0.2`, `r = 16`, `phi = 1`, `beta = -0.293`,
//! `h = 0.666`, `sigma0 = 0.36`, `q = 3`) in `open_loop` mode.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::Serialize;

use crate::certificates::{CbarMode, ExampleConstants};
use crate::controller::ControllerMode;
use crate::error::{Error, Result};
use crate::history::Interpolation;
use crate::model::{InitialHistory, SystemModel};
use crate::solver::SolverConfig;
use crate::trigger::{ComparisonFn, TriggerRule};

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "model",
    "mode",
    "b",
    "k",
    "r",
    "phi",
    "beta",
    "h",
    "sigma0",
    "sigma",
    "chi_exp",
    "alpha_exp",
    "q",
    "cbar_mode",
    "t0",
    "dt",
    "horizon",
    "tol_event",
    "interpolation",
    "zeno_guard",
    "lambda",
    "fit_from",
    "oracle_events",
    "oracle_t_max",
    "svg",
    "sweep_key",
    "sweep_values",
    "trajectory_file",
    "events_file",
    "report_file",
    "summary_file",
    "svg_file",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Worked scalar example; any constant may still be overridden.
    Example,
    /// User constants; `b`, `k` and `r` must be given.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    OpenLoop,
    EventOnly,
    ImpulsiveOnly,
    Hybrid,
}

impl ModeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeName::OpenLoop => "open_loop",
            ModeName::EventOnly => "event_only",
            ModeName::ImpulsiveOnly => "impulsive_only",
            ModeName::Hybrid => "hybrid",
        }
    }

    fn needs_dwell(&self) -> bool {
        matches!(self, ModeName::ImpulsiveOnly | ModeName::Hybrid)
    }
}

impl FromStr for ModeName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "open_loop" => ModeName::OpenLoop,
            "event_only" => ModeName::EventOnly,
            "impulsive_only" => ModeName::ImpulsiveOnly,
            "hybrid" => ModeName::Hybrid,
            _ => return Err("expected open_loop, event_only, impulsive_only or hybrid".into()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputNames {
    pub trajectory: String,
    pub events: String,
    pub report: String,
    pub summary: String,
    pub svg: String,
}

impl Default for OutputNames {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            events: "events.csv".into(),
            report: "report.json".into(),
            summary: "summary.json".into(),
            svg: "trajectory.svg".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub mode: ModeName,
    pub b: f64,
    pub k: f64,
    pub r: f64,
    pub phi: f64,
    pub beta: f64,
    pub h: f64,
    pub sigma0: f64,
    /// Generic trigger threshold; `sigma0` when unset.
    pub sigma: Option<f64>,
    pub chi_exp: f64,
    pub alpha_exp: f64,
    pub q: f64,
    pub cbar_mode: CbarMode,
    pub t0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub tol_event: f64,
    pub interpolation: Interpolation,
    pub zeno_guard: usize,
    pub lambda: f64,
    /// Start of the decay fit window; `t0` when unset.
    pub fit_from: Option<f64>,
    pub oracle_events: usize,
    pub oracle_t_max: f64,
    pub svg: bool,
    pub sweep_key: Option<String>,
    pub sweep_values: Vec<String>,
    pub outputs: OutputNames,
    /// Always true; no run draws random numbers.
    pub random_free: bool,
    #[serde(skip)]
    explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            model: ModelKind::Example,
            mode: ModeName::OpenLoop,
            b: -0.1,
            k: -0.2,
            r: 16.0,
            phi: 1.0,
            beta: -0.293,
            h: 0.666,
            sigma0: 0.36,
            sigma: None,
            chi_exp: 2.0,
            alpha_exp: 2.0,
            q: 3.0,
            cbar_mode: CbarMode::Full,
            t0: 0.0,
            dt: solver.dt,
            horizon: solver.horizon,
            tol_event: solver.tol_event,
            interpolation: solver.interpolation,
            zeno_guard: solver.zeno_cap,
            lambda: 0.0,
            fit_from: None,
            oracle_events: 10,
            oracle_t_max: 10.0,
            svg: false,
            sweep_key: None,
            sweep_values: Vec::new(),
            outputs: OutputNames::default(),
            random_free: true,
            explicit: BTreeSet::new(),
        }
    }
}

/// Parses configuration text and validates the result.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    config.apply_text(text)?;
    config.validate()?;
    Ok(config)
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once('=')?;
    let (key, value) = (key.trim(), value.trim());
    (!key.is_empty()).then_some((key, value))
}

fn number(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::validation(key, format!("`{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::validation(key, "must be finite"));
    }
    Ok(v)
}

fn count(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::validation(key, format!("`{value}` is not a non-negative integer")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::validation(key, format!("`{value}` is not a boolean"))),
    }
}

fn file_name(key: &str, value: &str) -> Result<String> {
    if value.is_empty() || value.contains(['/', '\\']) || value == "." || value == ".." {
        return Err(Error::validation(key, "must be a plain file name"));
    }
    Ok(value.to_string())
}

impl RunConfig {
    /// Applies the assignments of `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_assignment(line).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            if !KEYS.contains(&key) {
                return Err(Error::Parse { line: line_no, message: format!("unknown key `{key}`") });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse { line: line_no, message: format!("duplicate key `{key}`") });
            }
            self.set(key, value).map_err(|e| match e {
                Error::Validation { key, message } => Error::Validation {
                    key,
                    message: format!("{message} (line {line_no})"),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Parses and applies a single `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = split_assignment(assignment).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("override `{assignment}` is not `key=value`"),
        })?;
        if !KEYS.contains(&key) {
            return Err(Error::validation(key, "unknown key"));
        }
        self.set(key, value)
    }

    /// Assigns one key without cross-field validation.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => {
                self.model = match value {
                    "example" => ModelKind::Example,
                    "custom" => ModelKind::Custom,
                    _ => return Err(Error::validation(key, "expected example or custom")),
                }
            }
            "mode" => self.mode = value.parse().map_err(|m: String| Error::validation(key, m))?,
            "b" => self.b = number(key, value)?,
            "k" => self.k = number(key, value)?,
            "r" => self.r = number(key, value)?,
            "phi" => self.phi = number(key, value)?,
            "beta" => self.beta = number(key, value)?,
            "h" => self.h = number(key, value)?,
            "sigma0" => self.sigma0 = number(key, value)?,
            "sigma" => self.sigma = Some(number(key, value)?),
            "chi_exp" => self.chi_exp = number(key, value)?,
            "alpha_exp" => self.alpha_exp = number(key, value)?,
            "q" => self.q = number(key, value)?,
            "cbar_mode" => {
                self.cbar_mode = match value {
                    "full" => CbarMode::Full,
                    "impulsive_only" => CbarMode::ImpulsiveOnly,
                    _ => return Err(Error::validation(key, "expected full or impulsive_only")),
                }
            }
            "t0" => self.t0 = number(key, value)?,
            "dt" => self.dt = number(key, value)?,
            "horizon" => self.horizon = number(key, value)?,
            "tol_event" => self.tol_event = number(key, value)?,
            "interpolation" => {
                self.interpolation = match value {
                    "linear" => Interpolation::Linear,
                    "cubic" => Interpolation::Cubic,
                    _ => return Err(Error::validation(key, "expected linear or cubic")),
                }
            }
            "zeno_guard" => self.zeno_guard = count(key, value)?,
            "lambda" => self.lambda = number(key, value)?,
            "fit_from" => self.fit_from = Some(number(key, value)?),
            "oracle_events" => self.oracle_events = count(key, value)?,
            "oracle_t_max" => self.oracle_t_max = number(key, value)?,
            "svg" => self.svg = flag(key, value)?,
            "sweep_key" => self.sweep_key = Some(value.to_string()),
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(String::from)
                    .collect()
            }
            "trajectory_file" => self.outputs.trajectory = file_name(key, value)?,
            "events_file" => self.outputs.events = file_name(key, value)?,
            "report_file" => self.outputs.report = file_name(key, value)?,
            "summary_file" => self.outputs.summary = file_name(key, value)?,
            "svg_file" => self.outputs.svg = file_name(key, value)?,
            _ => return Err(Error::validation(key, "unknown key")),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model == ModelKind::Custom {
            for key in ["b", "k", "r"] {
                if !self.is_explicit(key) {
                    return Err(Error::validation(key, "required for model = custom"));
                }
            }
            if self.mode.needs_dwell() && !self.is_explicit("h") {
                return Err(Error::validation("h", format!("required for mode = {}", self.mode.as_str())));
            }
        }
        if !(self.r > 0.0) {
            return Err(Error::validation("r", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::validation("dt", "must be positive"));
        }
        if self.dt > self.r {
            return Err(Error::validation("dt", "must not exceed the delay r"));
        }
        if !(self.horizon > self.t0) {
            return Err(Error::validation("horizon", "must exceed t0"));
        }
        if !(self.tol_event > 0.0) {
            return Err(Error::validation("tol_event", "must be positive"));
        }
        if self.mode.needs_dwell() && !(self.h > 0.0) {
            return Err(Error::validation("h", "dwell must be positive"));
        }
        if !(self.sigma0 >= 0.0) {
            return Err(Error::validation("sigma0", "must be non-negative"));
        }
        let triggered = matches!(self.mode, ModeName::EventOnly | ModeName::Hybrid);
        if triggered && !(self.trigger_sigma() > 0.0) {
            let key = if self.sigma.is_some() { "sigma" } else { "sigma0" };
            return Err(Error::validation(key, "trigger threshold must be positive"));
        }
        if !(self.chi_exp > 0.0) {
            return Err(Error::validation("chi_exp", "must be positive"));
        }
        if !(self.alpha_exp > 0.0) {
            return Err(Error::validation("alpha_exp", "must be positive"));
        }
        if !(self.q > 1.0) {
            return Err(Error::validation("q", "must exceed 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::validation("lambda", "must be non-negative"));
        }
        if self.zeno_guard == 0 {
            return Err(Error::validation("zeno_guard", "must be positive"));
        }
        if !(self.oracle_t_max > 0.0) {
            return Err(Error::validation("oracle_t_max", "must be positive"));
        }
        if let Some(key) = &self.sweep_key {
            if !KEYS.contains(&key.as_str()) || key.starts_with("sweep") {
                return Err(Error::validation("sweep_key", format!("`{key}` cannot be swept")));
            }
        }
        Ok(())
    }

    /// Trigger threshold: `sigma` if given, else `sigma0`.
    pub fn trigger_sigma(&self) -> f64 {
        self.sigma.unwrap_or(self.sigma0)
    }

    pub fn with_mode(&self, mode: ModeName) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn system_model(&self) -> Result<SystemModel> {
        Ok(SystemModel::scalar_delay(self.b, self.r, self.k, self.beta, self.phi)?
            .with_initial(self.t0, InitialHistory::Constant(vec![self.phi])))
    }

    pub fn trigger_rule(&self) -> Result<TriggerRule> {
        TriggerRule::new(
            ComparisonFn::power(1.0, self.chi_exp),
            ComparisonFn::power(1.0, self.alpha_exp),
            self.trigger_sigma(),
        )
    }

    pub fn controller_mode(&self) -> ControllerMode {
        match self.mode {
            ModeName::OpenLoop => ControllerMode::OpenLoop,
            ModeName::EventOnly => ControllerMode::EventOnly,
            ModeName::ImpulsiveOnly => ControllerMode::ImpulsiveOnly { dwell: self.h },
            ModeName::Hybrid => ControllerMode::Hybrid { dwell: self.h },
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            horizon: self.horizon,
            interpolation: self.interpolation,
            tol_event: self.tol_event,
            zeno_cap: self.zeno_guard,
        }
    }

    pub fn constants(&self) -> ExampleConstants {
        ExampleConstants::new(self.b, self.k, self.r, self.sigma0, self.q, self.h, self.beta, self.cbar_mode)
    }

    pub fn fit_start(&self) -> f64 {
        self.fit_from.unwrap_or(self.t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hybrid_example_text() {
        let c = parse_config("mode = hybrid\nh = 0.666\nbeta = -0.293\nsigma0 = 0.36").unwrap();
        assert_eq!(c.mode, ModeName::Hybrid);
        assert_eq!(c.controller_mode(), ControllerMode::Hybrid { dwell: 0.666 });
        assert_eq!(c.b, -0.1);
        assert_eq!(c.r, 16.0);
    }

    #[test]
    fn empty_text_is_default_open_loop() {
        let c = parse_config("").unwrap();
        assert_eq!(c.mode, ModeName::OpenLoop);
        assert_eq!(c.model, ModelKind::Example);
        assert!(c.random_free);
    }

    #[test]
    fn negative_dt_names_key() {
        match parse_config("dt = -0.1") {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "dt"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        match parse_config("# header\nmode = hybrid\n\nfoo = 1\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("foo"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_duplicate_lines() {
        assert!(matches!(parse_config("dt 0.1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("dt = 0.1\ndt = 0.2"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn non_numeric_value_names_key_and_line() {
        match parse_config("\nk = abc") {
            Err(Error::Validation { key, message }) => {
                assert_eq!(key, "k");
                assert!(message.contains("line 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_overrides() {
        let mut c = parse_config("mode = event_only # trailing\n").unwrap();
        c.apply_override("horizon=40").unwrap();
        c.apply_override("interpolation = cubic").unwrap();
        assert_eq!(c.horizon, 40.0);
        assert_eq!(c.interpolation, Interpolation::Cubic);
        assert!(c.apply_override("nope=1").is_err());
        assert!(c.apply_override("nope").is_err());
    }

    #[test]
    fn custom_model_requires_constants() {
        assert!(matches!(
            parse_config("model = custom\nb = -1\nk = -1"),
            Err(Error::Validation { key, .. }) if key == "r"
        ));
        assert!(matches!(
            parse_config("model = custom\nb = -1\nk = -1\nr = 2\nmode = hybrid"),
            Err(Error::Validation { key, .. }) if key == "h"
        ));
        assert!(parse_config("model = custom\nb = -1\nk = -1\nr = 2\nmode = hybrid\nh = 0.1").is_ok());
    }

    #[test]
    fn output_names_must_be_plain() {
        assert!(parse_config("summary_file = ../x.json").is_err());
        assert_eq!(parse_config("svg_file = a.svg").unwrap().outputs.svg, "a.svg");
    }

    #[test]
    fn sweep_values_list() {
        let c = parse_config("sweep_key = h\nsweep_values = 0.5, 0.6 ,0.666").unwrap();
        assert_eq!(c.sweep_values, vec!["0.5", "0.6", "0.666"]);
        assert!(parse_config("sweep_key = sweep_values").is_err());
    }
}
