//! `chansr`: ray-trace scenes, cluster the multipath, build super-resolution
//! datasets, train and score models.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, SceneKind};

#[derive(Debug, Parser)]
#[command(name = "chansr", version, about = "Ray-traced multipath cluster super-resolution")]
struct Cli {
    /// TOML configuration with one table per stage.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every stochastic stage. Overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scene and receiver routes.
    SceneGen(SceneGenArgs),
    /// Trace every route of a scene.
    Trace(TraceArgs),
    /// Cluster traced snapshots into samples.
    Cluster(ClusterArgs),
    /// Split samples and write one manifest per scale.
    Dataset(DatasetArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Score the baseline and trained models on a test split.
    Eval(EvalArgs),
    /// Train a sweep of model variants and compare their errors.
    Ablate(AblateArgs),
    /// Rebuild impulse responses from predicted clusters.
    Cir(CirArgs),
    /// Summarize evaluation tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SceneGenArgs {
    /// Output directory for scene.json and routes.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    kind: Option<SceneKind>,
    /// Number of receiver routes.
    #[arg(long)]
    routes: Option<usize>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    routes: PathBuf,
    /// Snapshot JSON-lines output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cluster slots per sample.
    #[arg(long)]
    slots: Option<usize>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Sample files; repeat to pool several.
    #[arg(long, required = true)]
    samples: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Scale factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<u32>>,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// A manifest, or a dataset directory holding manifest_x<scale>.json.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    max_hidden: Option<usize>,
    /// Return only the last block's output.
    #[arg(long)]
    no_residual: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Model checkpoints, one per scale.
    #[arg(long)]
    model: Vec<PathBuf>,
    /// Scales to score the baseline at when no model is given.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<u32>>,
    #[arg(long)]
    out: PathBuf,
    /// Samples from unseen scenes for a generalization table.
    #[arg(long)]
    unseen: Option<PathBuf>,
    /// Generalization CSV output, required with --unseen.
    #[arg(long, requires = "unseen")]
    generalization_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    /// Max hidden widths to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    max_hidden: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct CirArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Traced snapshots the test samples were cut from.
    #[arg(long)]
    snapshots: PathBuf,
    /// Test sample to rebuild.
    #[arg(long, default_value_t = 0)]
    sample: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluation CSVs to aggregate.
    #[arg(long = "eval", required = true)]
    evals: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> chansr::Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if let Some(t) = cli.threads.or(config.threads) {
        chansr::par::set_threads(t);
    }
    let seed = config.seed.unwrap_or(0);
    match cli.command {
        Command::SceneGen(a) => commands::scene_gen(&config, seed, &a.out, a.kind, a.routes),
        Command::Trace(a) => commands::trace(&config, &a.scene, &a.routes, &a.out),
        Command::Cluster(a) => commands::cluster(&config, &a.snapshots, &a.out, a.slots),
        Command::Dataset(a) => commands::dataset(&config, seed, &a.samples, &a.out, a.scales, a.no_normalize),
        Command::Train(a) => {
            let mut t = config.train.clone();
            t.epochs = a.epochs.unwrap_or(t.epochs);
            t.learning_rate = a.lr.unwrap_or(t.learning_rate);
            t.batch_size = a.batch.unwrap_or(t.batch_size);
            t.max_hidden = a.max_hidden.unwrap_or(t.max_hidden);
            t.residual &= !a.no_residual;
            commands::train(&t, seed, &a.dataset, a.scale, &a.out)
        }
        Command::Eval(a) => commands::eval(
            &config,
            &a.dataset,
            &a.model,
            a.scales,
            &a.out,
            a.unseen.as_deref().zip(a.generalization_out.as_deref()),
        ),
        Command::Ablate(a) => {
            let mut t = config.train.clone();
            t.epochs = a.epochs.unwrap_or(t.epochs);
            let mut ab = config.ablate.clone();
            if let Some(m) = a.max_hidden {
                ab.max_hidden = m;
            }
            commands::ablate(&t, &ab, &config.eval, seed, &a.dataset, a.scale, &a.out)
        }
        Command::Cir(a) => commands::cir(&config, &a.dataset, &a.model, &a.snapshots, a.sample, &a.out),
        Command::Report(a) => commands::report(&a.evals, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
