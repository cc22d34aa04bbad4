use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bend_core::analysis::CostModelInputs;
use bend_core::app;
use bend_core::config::{Overrides, RunConfig};
use bend_core::ensemble::VoteMethod;
use bend_core::report::Report;
use bend_core::{BendError, Result};

#[derive(Parser)]
#[command(name = "bend", version, about = "Diffusion-generated classifier ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (`desk`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain, fine-tune and record the snapshot family.
    TrainBase(RunArgs),
    /// Fit the autoencoder and diffusion model, then generate `m` classifiers.
    Diffuse {
        #[command(flatten)]
        run: RunArgs,
        /// Snapshot family manifest (default: `<out>/family.toml`).
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Vote over a predictions CSV.
    Ensemble {
        predictions: PathBuf,
        #[arg(long, default_value = "sbend")]
        method: VoteMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Also write the report into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diversity and wrong-set overlap of generated vs original predictions.
    Analyze {
        generated: PathBuf,
        original: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Training-time comparison; reads `[cost]` from the config if given.
    Cost {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Largest ensemble size tabulated.
        #[arg(long, default_value_t = 10)]
        m: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact vote-outcome distributions for the three 3×3 scenarios.
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// train-base, diffuse, ensemble (both methods) and analyze in sequence.
    Pipeline(RunArgs),
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(BendError::Config("pass --config <path> or --preset desk".into())),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        out_dir: args.out.clone(),
        m: args.m,
        k: args.k,
        trials: args.trials,
        method: None,
    })?;
    Ok(cfg)
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    print!("{}", report.render());
    if let Some(dir) = out {
        app::write_report(dir, report)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainBase(args) => {
            let cfg = run_config(&args)?;
            emit(&app::cmd_train_base(&cfg)?, None)
        }
        Command::Diffuse { run, family } => {
            let cfg = run_config(&run)?;
            let family = family.unwrap_or_else(|| cfg.out_dir.join(app::FAMILY_FILE));
            emit(&app::cmd_diffuse(&cfg, &family)?, None)
        }
        Command::Ensemble {
            predictions,
            method,
            seed,
            trials,
            out,
        } => emit(&app::cmd_ensemble(&predictions, method, seed, trials)?, out.as_deref()),
        Command::Analyze {
            generated,
            original,
            out,
        } => emit(&app::cmd_analyze(&generated, &original)?, out.as_deref()),
        Command::Cost { config, m, out } => {
            let inputs = match config {
                Some(path) => RunConfig::load(&path)?.cost_inputs(),
                None => CostModelInputs::REFERENCE,
            };
            emit(&app::cmd_cost(&inputs, m)?, out.as_deref())
        }
        Command::Table1 { out } => emit(&app::cmd_table1()?, out.as_deref()),
        Command::Pipeline(args) => {
            let cfg = run_config(&args)?;
            for (i, r) in app::cmd_pipeline(&cfg)?.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                print!("{}", r.render());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
