use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use hybrid_ei::commands::{
    compare_command, simulate_command, sweep_command, termination_name, verify_command, zeno_command,
};
use hybrid_ei::config::RunConfig;
use hybrid_ei::{Error, Termination};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_ZENO: u8 = 4;

#[derive(Parser)]
#[command(name = "hybrid-ei", version, about = "Hybrid event-triggered/impulsive control of delay systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Suppress the result summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate the configured mode.
    Simulate,
    /// Evaluate the stability certificates.
    Verify,
    /// Event-only run with the Zeno guard and the closed-form oracle.
    Zeno,
    /// Hybrid against impulsive-only control.
    Compare,
    /// One simulation per value of `sweep_key`.
    Sweep,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        config.apply_text(&std::fs::read_to_string(path)?)?;
    }
    for assignment in &cli.set {
        config.apply_override(assignment)?;
    }
    config.validate()?;
    Ok(config)
}

fn error_record(err: &Error) -> serde_json::Value {
    let mut record = json!({ "status": "error", "category": err.category(), "message": err.to_string() });
    match err {
        Error::Parse { line, .. } => record["line"] = json!(line),
        Error::Validation { key, .. } => record["key"] = json!(key),
        _ => {}
    }
    record
}

fn termination_code(t: &Termination) -> u8 {
    match t {
        Termination::Horizon => 0,
        Termination::ZenoGuard { .. } => EXIT_ZENO,
        Termination::Error { .. } => EXIT_RUNTIME,
    }
}

fn run(cli: &Cli, config: &RunConfig) -> Result<(u8, serde_json::Value), Error> {
    let out = &cli.out;
    Ok(match cli.command {
        Command::Simulate => {
            let o = simulate_command(config, out)?;
            let s = &o.summary;
            (
                termination_code(&s.termination),
                json!({
                    "command": "simulate",
                    "mode": s.mode,
                    "termination": termination_name(&s.termination),
                    "final_time": s.final_time,
                    "feedback_updates": s.feedback_updates,
                    "impulses": s.impulses,
                    "decay_rate": s.decay_fit.rate,
                    "out": out,
                }),
            )
        }
        Command::Verify => {
            let r = verify_command(config, out)?;
            (
                0,
                json!({
                    "command": "verify",
                    "all_pass": r.all_pass(),
                    "first_failure": r.first_failure,
                    "roots": r.roots,
                    "rho_interval": r.rho_interval,
                    "condition_iii": r.condition_iii.passes,
                    "h_max": r.dwell_bound.h_max,
                }),
            )
        }
        Command::Zeno => {
            let z = zeno_command(config, out)?;
            (
                termination_code(&z.termination),
                json!({
                    "command": "zeno",
                    "verdict": z.report.verdict,
                    "events": z.report.event_count,
                    "termination": termination_name(&z.termination),
                    "accumulation_estimate": z.report.accumulation_estimate,
                    "oracle": z.oracle,
                }),
            )
        }
        Command::Compare => {
            let t = compare_command(config, out)?;
            let code = t.rows.iter().map(|r| termination_code(&r.termination)).max().unwrap_or(0);
            (code, json!({ "command": "compare", "table": t }))
        }
        Command::Sweep => {
            let t = sweep_command(config, out)?;
            let code = t.rows.iter().map(|r| termination_code(&r.summary.termination)).max().unwrap_or(0);
            let rows: Vec<_> = t
                .rows
                .iter()
                .map(|r| json!({ "value": r.value, "updates": r.summary.total_updates, "decay_rate": r.summary.decay_fit.rate }))
                .collect();
            (code, json!({ "command": "sweep", "key": t.key, "rows": rows }))
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|config| run(&cli, &config));
    match result {
        Ok((code, summary)) => {
            if !cli.quiet {
                println!("{summary}");
            }
            ExitCode::from(code)
        }
        Err(err) => {
            eprintln!("{}", error_record(&err));
            ExitCode::from(if err.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
