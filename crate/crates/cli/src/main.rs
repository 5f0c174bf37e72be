//! relu-sculpt: reduce a network's ReLU count to a hard budget and audit the
//! result.
//!
//! Exit codes: 0 success, 1 hard failure, 2 soft failure (an SNL run that
//! exhausted its epochs before reaching the target budget).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod configs;
mod logging;
mod manifest;

#[derive(Parser)]
#[command(
    name = "relu-sculpt",
    version,
    about = "ReLU-budget optimization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial evaluations per wave (mask artifacts are identical for any
    /// value; accuracies in logs may differ in float ordering only).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Count maskable ReLU sites per layer for an architecture.
    CountRelus {
        /// Network spec JSON file.
        spec: PathBuf,
        /// Input shape, comma-separated (e.g. 3,32,32).
        #[arg(long, value_delimiter = ',')]
        input_shape: Vec<usize>,
        /// Optional directory for a JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block-coordinate-descent reduction to an exact budget.
    RunBcd(RunArgs),
    /// LASSO-relaxed selective baseline with per-epoch checkpoints.
    RunSnl(RunArgs),
    /// Pairwise IoU analysis over a directory of mask checkpoints.
    AnalyzeIou {
        /// Directory containing .rmsk1 checkpoints.
        checkpoint_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force optimum and descent-bound audit on a tiny problem.
    AuditBounds(RunArgs),
    /// Merge results from run directories into one comparison CSV.
    Compare {
        /// Run directories (each containing results.json).
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a dataset fixture in the CIFAR-10 binary layout.
    GenData(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match dispatch(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::TargetNotReached) => {
            logging::error("target budget not reached (soft failure)");
            ExitCode::from(2)
        }
        Err(e) => {
            logging::error(e.to_string());
            ExitCode::from(1)
        }
    }
}

enum Outcome {
    Ok,
    TargetNotReached,
}

fn dispatch(cli: Cli) -> relu_sculpt_core::error::Result<Outcome> {
    match cli.command {
        Command::CountRelus {
            spec,
            input_shape,
            out,
        } => {
            commands::count_relus::run(&spec, &input_shape, out.as_deref())?;
            Ok(Outcome::Ok)
        }
        Command::RunBcd(args) => {
            let cfg: configs::RunBcdConfig = configs::read_config(&args.config)?;
            let seed = args.seed.unwrap_or(cfg.seed);
            commands::run_bcd::run(&args.config, &cfg, &args.out, seed, args.threads)?;
            Ok(Outcome::Ok)
        }
        Command::RunSnl(args) => {
            let cfg: configs::RunSnlConfig = configs::read_config(&args.config)?;
            let seed = args.seed.unwrap_or(cfg.seed);
            let reached =
                commands::run_snl::run(&args.config, &cfg, &args.out, seed, args.threads)?;
            Ok(if reached {
                Outcome::Ok
            } else {
                Outcome::TargetNotReached
            })
        }
        Command::AnalyzeIou {
            checkpoint_dir,
            out,
        } => {
            commands::analyze_iou::run(&checkpoint_dir, &out)?;
            Ok(Outcome::Ok)
        }
        Command::AuditBounds(args) => {
            let cfg: configs::AuditBoundsConfig = configs::read_config(&args.config)?;
            let seed = args.seed.unwrap_or(cfg.seed);
            commands::audit_bounds::run(&args.config, &cfg, &args.out, seed, args.threads)?;
            Ok(Outcome::Ok)
        }
        Command::Compare { run_dirs, out } => {
            commands::compare::run(&run_dirs, out.as_deref())?;
            Ok(Outcome::Ok)
        }
        Command::GenData(args) => {
            let cfg: configs::GenDataConfig = configs::read_config(&args.config)?;
            let seed = args.seed.unwrap_or(cfg.seed);
            commands::gen_data::run(&args.config, &cfg, &args.out, seed)?;
            Ok(Outcome::Ok)
        }
    }
}
