//! `fkup`: run one experiment from a JSON configuration.
//!
//! Exit codes: 0 on success, 1 on a configuration error, 2 on an experiment
//! error, 3 when `--check` is given and an acceptance check fails. Errors
//! go to standard error as single-line JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fkup_core::harness::{self, Experiment, ExperimentConfig};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "fkup", version, about = "Frenkel-Kontorova chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Exit with status 3 unless every acceptance check passes.
    #[arg(long)]
    check: bool,
    /// Output directory, overriding the configuration's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent rows.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the periodic potential and compare p(1) with a Simpson oracle.
    ValidatePotential(RunArgs),
    /// Tabulate the wall profile and check equipartition.
    Profile(RunArgs),
    /// Minimize at every grid point.
    Minimize(RunArgs),
    /// Mesoscale minimum energies along a delta grid.
    SweepDelta(RunArgs),
    /// Two-scale minimum energies along an (epsilon, delta) grid.
    SweepEpsilon(RunArgs),
    /// Order of the discrete/continuum energy gap.
    GapOrder(RunArgs),
    /// Recovery sequences for a target step function.
    Recovery(RunArgs),
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Self::ValidatePotential(a) => (Experiment::ValidatePotential, a),
            Self::Profile(a) => (Experiment::Profile, a),
            Self::Minimize(a) => (Experiment::Minimize, a),
            Self::SweepDelta(a) => (Experiment::SweepDelta, a),
            Self::SweepEpsilon(a) => (Experiment::SweepEpsilon, a),
            Self::GapOrder(a) => (Experiment::GapOrder, a),
            Self::Recovery(a) => (Experiment::Recovery, a),
        }
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_EXPERIMENT: u8 = 2;
const EXIT_CHECK: u8 = 3;

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message, "exit_code": code }));
    ExitCode::from(code)
}

fn load_config(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| "configuration must be a JSON object".to_owned())?;
    match obj.get("experiment") {
        None => {
            obj.insert("experiment".into(), experiment.name().into());
        }
        Some(v) if v.as_str() == Some(experiment.name()) => {}
        Some(v) => {
            return Err(format!(
                "configuration is for experiment {v}, not {}",
                experiment.name()
            ))
        }
    }
    let mut cfg = ExperimentConfig::from_json(&value.to_string()).map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let (experiment, args) = Cli::parse().command.split();
    let cfg = match load_config(experiment, &args) {
        Ok(cfg) => cfg,
        Err(msg) => return fail(EXIT_CONFIG, "config", &msg),
    };
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return fail(EXIT_CONFIG, "config", "--jobs must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return fail(EXIT_EXPERIMENT, "threads", &e.to_string());
        }
    }
    let result = match harness::run(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_EXPERIMENT, e.kind(), &e.to_string()),
    };
    if let Err(e) = result.write_outputs(&cfg.output_dir) {
        return fail(EXIT_EXPERIMENT, e.kind(), &e.to_string());
    }
    println!(
        "{}",
        json!({
            "experiment": experiment.name(),
            "passed": result.passed,
            "fitted_order": result.fitted_order,
            "output_dir": cfg.output_dir,
        })
    );
    if args.check && !result.passed {
        let failed: Vec<_> = result
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return fail(EXIT_CHECK, "check", &failed.join("; "));
    }
    ExitCode::SUCCESS
}
