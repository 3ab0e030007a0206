//! `cvphase`: runs the toolkit's named scenarios from JSON configs.
//!
//! Exit codes: 0 success, 2 a scenario assertion failed (or the run could not
//! finish), 3 bad config or arguments.

mod config;
mod error;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvphase::conditional::{POSITIVITY_FLOOR, PROBABILITY_FLOOR};
use cvphase::gaussian::HEISENBERG_TOLERANCE;
use cvphase::measurements::COMPLETENESS_TOLERANCE;
use cvphase::steering::{CHAIN_TOLERANCE, REID_TOLERANCE, SLICE_FLOOR};
use serde::Serialize;
use serde_json::json;

use config::{Loaded, Overrides, ScenarioConfig};
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "cvphase", version, about = "Conditional Wigner functions, steering and remote negativity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heisenberg defect, witness certificate and Reid product over a Gaussian sweep.
    SteerSweep(Common),
    /// Certificates of unphysical conditional states on a grid of Alice points.
    Counterexample(Common),
    /// Alice's state heralded by one of Bob's outcomes.
    RemoteNegativity(Common),
    /// Homodyne and conditional-Wigner variances with the inequality chain.
    ChainAudit(Common),
    /// Samples a joint, reduced or conditional Wigner function to a field file.
    FieldDump(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per axis of the scenario's main grid.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Half-width of the scenario's main grid.
    #[arg(long)]
    grid_l: Option<f64>,
    /// Seed for random conditioning points.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::SteerSweep(c) => ("steer-sweep", c),
            Command::Counterexample(c) => ("counterexample", c),
            Command::RemoteNegativity(c) => ("remote-negativity", c),
            Command::ChainAudit(c) => ("chain-audit", c),
            Command::FieldDump(c) => ("field-dump", c),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    library_version: &'a str,
    cli_version: &'a str,
    status: &'a str,
    failures: &'a [String],
    config: &'a ScenarioConfig,
    grids: serde_json::Value,
    tolerances: serde_json::Value,
    outputs: &'a [String],
}

fn run(name: &str, common: &Common) -> Result<Vec<String>, CliError> {
    let overrides = Overrides {
        out: common.out.clone(),
        grid_n: common.grid_n,
        grid_l: common.grid_l,
        seed: common.seed,
    };
    let loaded = Loaded::load(common.config.as_deref(), name, &overrides)?;
    let scenario = scenarios::lookup(name)
        .ok_or_else(|| CliError::Config(format!("unknown scenario `{name}`")))?;
    let mut out = OutputDir::create(&loaded.output_dir())?;
    let outcome = scenario.run(&loaded, &mut out)?;

    // The output location is not part of the experiment.
    let mut echo = loaded.config.clone();
    echo.output = None;
    let mut outputs = out.files().to_vec();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        scenario: name,
        library_version: cvphase::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        status: if outcome.failures.is_empty() { "pass" } else { "fail" },
        failures: &outcome.failures,
        config: &echo,
        grids: outcome.grids,
        tolerances: json!({
            "positivity_floor": POSITIVITY_FLOOR,
            "probability_floor": PROBABILITY_FLOOR,
            "heisenberg": HEISENBERG_TOLERANCE,
            "reid": REID_TOLERANCE,
            "chain": CHAIN_TOLERANCE,
            "slice_floor": SLICE_FLOOR,
            "completeness": COMPLETENESS_TOLERANCE,
        }),
        outputs: &outputs,
    };
    out.json("manifest.json", &manifest)?;
    Ok(outcome.failures)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, common) = cli.command.split();
    match run(name, common) {
        Ok(failures) if failures.is_empty() => {
            println!("{name}: pass");
            ExitCode::SUCCESS
        }
        Ok(failures) => {
            for f in &failures {
                eprintln!("{name}: FAIL: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
