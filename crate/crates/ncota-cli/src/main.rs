//! Command-line runner: loads a config, runs the experiment, writes
//! `runs.csv` and `summary.json` into the output directory.
//!
//! Exits 0 on success; on failure prints a single JSON error line to
//! stderr and exits 1.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ncota::channel::InterferenceKind;
use ncota::harness::{emit_results, load_config, run_experiment, EstimatorKind, Overrides};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ncota", version, about = "Decentralized optimization over simulated wireless channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML key-value pairs; empty file for defaults).
    config: PathBuf,
    /// Master seed; overrides the config key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for runs.csv and summary.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Estimator; overrides the config key.
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Interference source; overrides the config key.
    #[arg(long, value_enum)]
    interference: Option<InterferenceArg>,
    /// Iteration count; overrides the config key.
    #[arg(long)]
    iterations: Option<u64>,
    /// Realization count; overrides the config key.
    #[arg(long)]
    realizations: Option<u64>,
    /// Also write per-realization node positions as geometry_rz<k>.csv.
    #[arg(long)]
    dump_geometry: bool,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Ncota,
    IrNcota,
    Oracle,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(value: EstimatorArg) -> Self {
        match value {
            EstimatorArg::Ncota => EstimatorKind::Ncota,
            EstimatorArg::IrNcota => EstimatorKind::IrNcota,
            EstimatorArg::Oracle => EstimatorKind::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InterferenceArg {
    None,
    GaussianJammer,
    SingleSample,
}

impl From<InterferenceArg> for InterferenceKind {
    fn from(value: InterferenceArg) -> Self {
        match value {
            InterferenceArg::None => InterferenceKind::None,
            InterferenceArg::GaussianJammer => InterferenceKind::GaussianJammer,
            InterferenceArg::SingleSample => InterferenceKind::SingleSample,
        }
    }
}

fn run(args: &RunArgs) -> anyhow::Result<()> {
    let overrides = Overrides {
        seed: args.seed,
        estimator: args.estimator.map(Into::into),
        interference: args.interference.map(Into::into),
        iterations: args.iterations,
        realizations: args.realizations,
        dump_geometry: args.dump_geometry,
    };
    let cfg = load_config(&args.config, &overrides)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if !args.quiet {
        eprintln!(
            "running: estimator {:?}, interference {:?}, {} nodes, {} iterations x {} realizations, seed {}",
            cfg.estimator, cfg.interference, cfg.num_nodes, cfg.iterations, cfg.realizations,
            cfg.seed
        );
    }
    let result = run_experiment(&cfg)?;
    emit_results(&result, &args.out)?;
    if !args.quiet {
        let s = &result.summary;
        if !s.solver_converged {
            eprintln!("warning: centralized solver hit its iteration cap");
        }
        eprintln!(
            "done: final normalized error {:.6e}, subopt gap {:.6e}, test error {:.4}",
            s.final_normalized_error, s.final_subopt_gap, s.final_test_error
        );
        eprintln!("wrote {}", args.out.join("runs.csv").display());
        eprintln!("wrote {}", args.out.join("summary.json").display());
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
    };
    if let Err(error) = result {
        eprintln!("{}", serde_json::json!({ "error": format!("{error:#}") }));
        std::process::exit(1);
    }
}
