use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sgd_walk::config::DataSource;
use sgd_walk::plot::render_plots;
use sgd_walk::{run_experiment, verify_run, ExperimentConfig, RecipeRegistry, Result, RunError};

#[derive(Parser)]
#[command(name = "sgd-walk", version, about = "Trajectory diagnostics for GD/SGD training runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataArg {
    Blobs,
    Idx,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a named experiment and write its artifacts to --out.
    Run {
        #[arg(long)]
        experiment: String,
        /// TOML config; defaults apply for anything it leaves out.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Master seed (overrides the config file).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: rayon's choice). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum)]
        data: Option<DataArg>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Training-set size.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<u64>,
        /// "auto" or a schedule such as "constant:0.5", "stepwise:0.5,0.5,100".
        #[arg(long)]
        lr_schedule: Option<String>,
        /// "none" or "iso:FACTOR".
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        eval_period: Option<u64>,
    },
    /// Render SVG plots from a run directory's CSVs.
    Plot {
        #[arg(long)]
        run: PathBuf,
    },
    /// Re-hash a run directory against its manifest.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
    /// List the registered experiments.
    List,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            experiment,
            config,
            out,
            seed,
            threads,
            data,
            images,
            labels,
            limit,
            batch_size,
            epochs,
            lr_schedule,
            noise,
            eval_period,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            cfg.experiment.name = experiment;
            if let Some(s) = seed {
                cfg.experiment.master_seed = s;
            }
            if let Some(d) = data {
                cfg.data.source = match d {
                    DataArg::Blobs => DataSource::Blobs,
                    DataArg::Idx => DataSource::Idx,
                };
            }
            if images.is_some() {
                cfg.data.images = images;
            }
            if labels.is_some() {
                cfg.data.labels = labels;
            }
            if let Some(n) = limit {
                cfg.data.train_size = n;
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = b;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(s) = lr_schedule {
                cfg.train.lr = s;
            }
            if let Some(n) = noise {
                cfg.train.noise = n;
            }
            if let Some(p) = eval_period {
                cfg.train.eval_period = p;
            }
            let run = || run_experiment(&cfg, &out);
            let manifest = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| RunError::Config(e.to_string()))?
                    .install(run)?,
                None => run()?,
            };
            println!("{}: {} files written to {}", manifest.experiment, manifest.files.len(), out.display());
            for (label, lr) in &manifest.learning_rates {
                println!("  lr[{label}] = {lr}");
            }
        }
        Command::Plot { run } => {
            for path in render_plots(&run)? {
                println!("{}", path.display());
            }
        }
        Command::Verify { run } => {
            let n = verify_run(&run)?;
            println!("{n} files match the manifest");
        }
        Command::List => {
            for recipe in RecipeRegistry::builtin().iter() {
                println!("{:<18} {}", recipe.name(), recipe.about());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
