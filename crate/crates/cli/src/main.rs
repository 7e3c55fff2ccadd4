use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tofmpi_cli::commands::{self, Common};
use tofmpi_cli::CliError;
use tofmpi_core::sensor::GenerationMode;

#[derive(Parser)]
#[command(
    name = "tofmpi",
    version,
    about = "Multipath interference simulation and depth correction for AMCW LiDAR"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML run configuration (defaults are used when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker thread cap
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Measurement simulation mode, overriding the config
    #[arg(long, global = true)]
    mode: Option<GenerationMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled multi-frequency dataset
    Generate {
        /// Number of samples
        #[arg(long)]
        n: Option<usize>,
    },
    /// Tune booster hyperparameters and the KNN neighbour count
    Tune {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Train the booster on the training split
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// best_params.json written by `tune`
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Score raw depth, the booster and KNN on both splits
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Render the corner scene, optionally correcting it with a model
    Scene {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Consolidate results found under an artifacts directory
    Report {
        #[arg(long)]
        artifacts: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let common = Common {
        config: g.config,
        seed: g.seed,
        out: g.out,
        mode: g.mode,
    };
    match cli.command {
        Command::Generate { n } => {
            let p = commands::cmd_generate(&common, n)?;
            println!("wrote {}", p.display());
        }
        Command::Tune { dataset } => {
            let b = commands::cmd_tune(&common, &dataset)?;
            println!("booster: {}", serde_json::to_string(&b.booster)?);
            println!("knn k = {}", b.knn_k);
        }
        Command::Train { dataset, params } => {
            let m = commands::cmd_train(&common, &dataset, params.as_deref())?;
            println!("trained {} trees", m.trees.len());
        }
        Command::Eval { dataset, model } => {
            let rows = commands::cmd_eval(&common, &dataset, &model)?;
            print!("{}", tofmpi_evalkit::format_report_text(&rows));
        }
        Command::Scene { model } => {
            let m = commands::cmd_scene(&common, model.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Report { artifacts } => {
            print!("{}", commands::cmd_report(&common, &artifacts)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
