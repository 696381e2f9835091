use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairsim_core::harness::{self, builtin, RunOptions, Scenario};
use fairsim_core::HarnessError;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "fairsim",
    version,
    about = "Reward-fairness simulator for committee-based blockchains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its outputs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's replication count.
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Also dump every delivered message as events-<i>.jsonl.
        #[arg(long)]
        trace: bool,
        /// Replications run in parallel; all cores by default.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Regenerate a figure's data (selection-highest, selection-lowest,
    /// ev-sync-rewards).
    Figure {
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-grade stored chains and verify every output file against them.
    Check {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a built-in scenario as JSON, or list them all.
    Scenario {
        /// Omit to list the available names.
        name: Option<String>,
    },
}

/// Exit status for invalid input, as opposed to a failed run.
const EXIT_INVALID: u8 = 2;

fn error_json(e: &HarnessError) -> (u8, Value) {
    match e {
        HarnessError::Validation(v) => (
            EXIT_INVALID,
            json!({"error": "validation", "field": v.field, "message": v.message}),
        ),
        HarnessError::Parse { path, message } => (
            EXIT_INVALID,
            json!({"error": "parse", "field": path, "message": message}),
        ),
        HarnessError::UnknownFigure(n) => (
            EXIT_INVALID,
            json!({"error": "unknown_figure", "name": n, "message": e.to_string()}),
        ),
        HarnessError::UnknownScenario(n) => (
            EXIT_INVALID,
            json!({"error": "unknown_scenario", "name": n, "message": e.to_string()}),
        ),
        HarnessError::Inconsistent(m) => (1, json!({"error": "inconsistent", "message": m})),
        other => (1, json!({"error": "run", "message": other.to_string()})),
    }
}

fn classification_summary(run: &harness::RunOutput) -> Vec<Value> {
    run.replications
        .iter()
        .map(|r| {
            json!({
                "replication": r.index,
                "seed": r.seed,
                "classification": r.report.classification,
            })
        })
        .collect()
}

enum Reply {
    Json(Value),
    /// Already-rendered JSON, printed verbatim.
    Text(String),
}

fn execute(cmd: Command) -> Result<Reply, HarnessError> {
    match cmd {
        Command::Run {
            scenario,
            seed,
            reps,
            out,
            trace,
            jobs,
        } => {
            let s = Scenario::from_file(&scenario)?;
            let opts = RunOptions {
                seed,
                replications: reps,
                jobs,
                trace,
            };
            let run = harness::run_scenario(&s, &opts)?;
            let files = harness::write_run(&out, &run, trace)?;
            Ok(Reply::Json(json!({
                "scenario": run.scenario.name,
                "out": out,
                "files": files.len(),
                "replications": classification_summary(&run),
            })))
        }
        Command::Figure { name, out, jobs } => {
            let f = harness::reproduce_figure(&name, &out, jobs)?;
            Ok(Reply::Json(json!({"figure": f.figure.name(), "data": f.data})))
        }
        Command::Check { out } => {
            let r = harness::check_outputs(&out)?;
            Ok(Reply::Json(json!({
                "scenario": r.scenario,
                "replications": r.replications,
                "heights": r.heights,
                "classifications": r.classifications,
                "consistent": true,
            })))
        }
        Command::Scenario { name: None } => Ok(Reply::Json(json!(builtin::names()))),
        Command::Scenario { name: Some(n) } => Ok(Reply::Text(builtin::named(&n)?.to_json())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(reply) => {
            let text = match reply {
                Reply::Json(v) => serde_json::to_string_pretty(&v).expect("json values serialize"),
                Reply::Text(t) => t,
            };
            // a closed pipe downstream is not our failure
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (code, body) = error_json(&e);
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
