//! Run orchestration behind the CLI subcommands.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    compare_to_oracle, decay_fit, lyapunov_trace, zeno_recursion_oracle, zeno_report, DecayFit,
    OracleComparison, ZenoReport,
};
use crate::certificates::{certify, CertificateReport};
use crate::config::{ModeName, RunConfig};
use crate::controller::{run_simulation, SimResult, Termination};
use crate::error::{Error, Result};
use crate::output::{
    events_csv, fmt_f64, state_series, svg_chart, table_csv, trajectory_csv, write_atomic, write_json,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub trajectory: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub summary: PathBuf,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: &'static str,
    pub final_time: f64,
    pub termination: Termination,
    pub feedback_updates: usize,
    pub impulses: usize,
    pub total_updates: usize,
    pub min_gap: Option<f64>,
    pub decay_fit: DecayFit,
    pub max_abs_state: f64,
    pub lyapunov_lambda: f64,
    pub lyapunov_sup: f64,
    pub lyapunov_sup_time: f64,
    pub lambda_too_large: bool,
}

impl RunSummary {
    pub fn of(sim: &SimResult, config: &RunConfig) -> Self {
        let min_gap = sim.events.records.iter().map(|r| r.gap).reduce(f64::min);
        let trace = lyapunov_trace(&sim.trajectory, |x| x.iter().map(|v| v * v).sum(), config.lambda, sim.t0);
        Self {
            mode: sim.mode.name(),
            final_time: sim.final_time(),
            termination: sim.termination.clone(),
            feedback_updates: sim.feedback_updates(),
            impulses: sim.impulses(),
            total_updates: sim.events.len(),
            min_gap,
            decay_fit: decay_fit(&sim.trajectory, config.fit_start()),
            max_abs_state: sim.max_norm_on(f64::NEG_INFINITY, f64::INFINITY),
            lyapunov_lambda: config.lambda,
            lyapunov_sup: trace.sup,
            lyapunov_sup_time: trace.sup_time,
            lambda_too_large: trace.lambda_too_large,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateOutcome {
    pub artifacts: RunArtifacts,
    pub summary: RunSummary,
}

/// Runs the configured simulation without writing anything.
pub fn simulate(config: &RunConfig) -> Result<SimResult> {
    run_simulation(
        &config.system_model()?,
        &config.trigger_rule()?,
        config.controller_mode(),
        &config.solver(),
    )
}

fn write_run(config: &RunConfig, sim: &SimResult, out: &Path, artifacts: &mut RunArtifacts) -> Result<()> {
    let names = &config.outputs;
    let traj = out.join(&names.trajectory);
    write_atomic(&traj, trajectory_csv(sim).as_bytes())?;
    artifacts.trajectory = Some(traj);
    let events = out.join(&names.events);
    write_atomic(&events, events_csv(sim).as_bytes())?;
    artifacts.events = Some(events);
    if config.svg {
        let svg = out.join(&names.svg);
        let title = format!("{} run, {} updates", sim.mode.name(), sim.events.len());
        write_atomic(&svg, svg_chart(&title, &state_series(sim)).as_bytes())?;
        artifacts.svg = Some(svg);
    }
    Ok(())
}

/// Simulates one mode and writes trajectory, events, summary and the
/// optional chart.
pub fn simulate_command(config: &RunConfig, out: &Path) -> Result<SimulateOutcome> {
    let sim = simulate(config)?;
    let mut artifacts = RunArtifacts { summary: out.join(&config.outputs.summary), ..Default::default() };
    write_run(config, &sim, out, &mut artifacts)?;
    let summary = RunSummary::of(&sim, config);
    write_json(&artifacts.summary, &summary)?;
    Ok(SimulateOutcome { artifacts, summary })
}

/// Certificate pipeline on the configured constants; no simulation.
pub fn verify_command(config: &RunConfig, out: &Path) -> Result<CertificateReport> {
    let report = certify(&config.constants(), config.cbar_mode)?;
    write_json(&out.join(&config.outputs.report), &report)?;
    #[derive(Serialize)]
    struct VerifySummary<'a> {
        all_pass: bool,
        first_failure: &'a Option<String>,
        roots: Option<(f64, f64)>,
        rho_interval: Option<(f64, f64)>,
        h_max: f64,
    }
    write_json(
        &out.join(&config.outputs.summary),
        &VerifySummary {
            all_pass: report.all_pass(),
            first_failure: &report.first_failure,
            roots: report.roots,
            rho_interval: report.rho_interval,
            h_max: report.dwell_bound.h_max,
        },
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoOutcome {
    pub report: ZenoReport,
    pub termination: Termination,
    /// Deviations from the closed-form recursion over the first
    /// `oracle_events` updates.
    pub oracle: Option<OracleComparison>,
    /// Why the oracle was not consulted.
    pub oracle_skipped: Option<String>,
    pub oracle_accumulation_time: Option<f64>,
}

/// Event-only run with the Zeno guard, checked against the closed-form
/// recursion when its preconditions hold.
pub fn zeno_command(config: &RunConfig, out: &Path) -> Result<ZenoOutcome> {
    let config = config.with_mode(ModeName::EventOnly);
    let sim = simulate(&config)?;

    let t_max = config.oracle_t_max.min(config.r);
    let quadratic = config.chi_exp == 2.0 && config.alpha_exp == 2.0 && config.sigma.is_none();
    let (oracle, oracle_skipped, oracle_accumulation_time) = if !quadratic {
        (None, Some("trigger rule is not the quadratic sigma0 rule".to_string()), None)
    } else if config.t0 != 0.0 {
        (None, Some("oracle starts at t0 = 0".to_string()), None)
    } else {
        match zeno_recursion_oracle(config.phi, config.b, config.k, config.sigma0, config.r, t_max) {
            Ok(o) => (
                Some(compare_to_oracle(&sim, &o.events, config.oracle_events)),
                None,
                Some(o.accumulation_time),
            ),
            Err(e) => (None, Some(e.to_string()), None),
        }
    };

    let mut artifacts = RunArtifacts { summary: out.join(&config.outputs.summary), ..Default::default() };
    write_run(&config, &sim, out, &mut artifacts)?;
    let outcome = ZenoOutcome {
        report: zeno_report(&sim, None),
        termination: sim.termination.clone(),
        oracle,
        oracle_skipped,
        oracle_accumulation_time,
    };
    write_json(&out.join(&config.outputs.report), &outcome)?;
    write_json(&artifacts.summary, &RunSummary::of(&sim, &config))?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub mode: &'static str,
    pub feedback_updates: usize,
    pub impulses: usize,
    pub total_updates: usize,
    pub decay_rate: f64,
    pub final_time: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub horizon: f64,
    pub dwell: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, mode: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }
}

/// Hybrid against impulsive-only control on identical constants.
pub fn compare_runs(config: &RunConfig) -> Result<(ComparisonTable, Vec<(RunConfig, SimResult)>)> {
    let modes = [ModeName::Hybrid, ModeName::ImpulsiveOnly];
    let runs: Vec<Result<(RunConfig, SimResult)>> = std::thread::scope(|s| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&m| {
                let cfg = config.with_mode(m);
                s.spawn(move || simulate(&cfg).map(|sim| (cfg, sim)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = runs
        .iter()
        .map(|(cfg, sim)| ComparisonRow {
            mode: sim.mode.name(),
            feedback_updates: sim.feedback_updates(),
            impulses: sim.impulses(),
            total_updates: sim.events.len(),
            decay_rate: decay_fit(&sim.trajectory, cfg.fit_start()).rate,
            final_time: sim.final_time(),
            termination: sim.termination.clone(),
        })
        .collect();
    Ok((ComparisonTable { horizon: config.horizon, dwell: config.h, rows }, runs))
}

pub fn compare_command(config: &RunConfig, out: &Path) -> Result<ComparisonTable> {
    let (table, runs) = compare_runs(config)?;
    for (cfg, sim) in &runs {
        let mut cfg = cfg.clone();
        let tag = sim.mode.name();
        cfg.outputs.trajectory = format!("trajectory_{tag}.csv");
        cfg.outputs.events = format!("events_{tag}.csv");
        cfg.outputs.svg = format!("trajectory_{tag}.svg");
        write_run(&cfg, sim, out, &mut RunArtifacts::default())?;
    }
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.mode.to_string(),
                r.feedback_updates.to_string(),
                r.impulses.to_string(),
                r.total_updates.to_string(),
                fmt_f64(r.decay_rate),
                fmt_f64(r.final_time),
            ]
        })
        .collect();
    let header = ["mode", "feedback_updates", "impulses", "total_updates", "decay_rate", "final_time"];
    write_atomic(&out.join("compare.csv"), table_csv(&header, &rows).as_bytes())?;
    write_json(&out.join(&config.outputs.summary), &table)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub directory: PathBuf,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub key: String,
    pub rows: Vec<SweepRow>,
}

/// Simulates once per value of `sweep_key`, each run in its own
/// subdirectory. Runs execute concurrently.
pub fn sweep_command(config: &RunConfig, out: &Path) -> Result<SweepTable> {
    let key = config
        .sweep_key
        .clone()
        .ok_or_else(|| Error::validation("sweep_key", "required for sweep"))?;
    if config.sweep_values.is_empty() {
        return Err(Error::validation("sweep_values", "required for sweep"));
    }
    let configs = config
        .sweep_values
        .iter()
        .map(|v| {
            let mut c = config.clone();
            c.set(&key, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;

    let results: Vec<Result<SweepRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .zip(&config.sweep_values)
            .enumerate()
            .map(|(i, (c, v))| {
                let dir = out.join(format!("{key}_{i:03}"));
                s.spawn(move || {
                    let outcome = simulate_command(c, &dir)?;
                    Ok(SweepRow { value: v.clone(), directory: dir, summary: outcome.summary })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.value.clone(),
                r.summary.feedback_updates.to_string(),
                r.summary.impulses.to_string(),
                fmt_f64(r.summary.decay_fit.rate),
                fmt_f64(r.summary.final_time),
                termination_name(&r.summary.termination).to_string(),
            ]
        })
        .collect();
    let header = [key.as_str(), "feedback_updates", "impulses", "decay_rate", "final_time", "termination"];
    write_atomic(&out.join("sweep.csv"), table_csv(&header, &csv_rows).as_bytes())?;
    let table = SweepTable { key, rows };
    write_json(&out.join(&config.outputs.summary), &table)?;
    Ok(table)
}

pub fn termination_name(t: &Termination) -> &'static str {
    match t {
        Termination::Horizon => "horizon",
        Termination::ZenoGuard { .. } => "zeno_guard",
        Termination::Error { .. } => "error",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn simulate_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("mode = hybrid\nhorizon = 5\ndt = 0.01\nsvg = true").unwrap();
        let outcome = simulate_command(&cfg, dir.path()).unwrap();
        for p in [&outcome.artifacts.trajectory, &outcome.artifacts.events, &outcome.artifacts.svg] {
            assert!(p.as_ref().unwrap().exists());
        }
        assert!(outcome.artifacts.summary.exists());
        let csv = std::fs::read_to_string(outcome.artifacts.trajectory.unwrap()).unwrap();
        assert!(csv.starts_with("t,x0,u0,event_flag\n"));
    }

    #[test]
    fn sweep_runs_each_value() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("mode = hybrid\nhorizon = 3\ndt = 0.01\nsweep_key = h\nsweep_values = 0.5,1.0").unwrap();
        let table = sweep_command(&cfg, dir.path()).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(dir.path().join("h_001").join("trajectory.csv").exists());
        assert!(dir.path().join("sweep.csv").exists());
    }

    #[test]
    fn sweep_rejects_bad_value() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("sweep_key = dt\nsweep_values = 0.01,-1").unwrap();
        assert!(matches!(sweep_command(&cfg, dir.path()), Err(Error::Validation { key, .. }) if key == "dt"));
    }
}
