use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use consel_core::{Error, ErrorKind};

mod commands;

#[derive(Parser)]
#[command(name = "consel", version, about = "Influence-based multitask data selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a synthetic multitask world as shards, manifest and labels.
    GenSynth(GenSynthArgs),
    /// Train the warmup model on a random slice of the pool.
    Warmup(WarmupArgs),
    /// Write per-example gradient shards of the warmup model.
    Grads(GradsArgs),
    /// Randomly project and unit-normalize every shard of a manifest.
    Project(ProjectArgs),
    /// Compute the N x K table of mean task influences.
    Influence(InfluenceArgs),
    /// Write per-example aggregate keys instead of selections.
    Aggregate(SelectArgs),
    /// Select subsets for every requested ratio and strategy.
    Select(SelectArgs),
    /// Vote distribution statistics across ratios.
    Stats(StatsArgs),
    /// Overlap between per-task top sets and a selection.
    Overlap(OverlapArgs),
    /// Retrain on a selection and report accuracy relative to the full pool.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of pool labels replaced by a wrong class.
    #[arg(long, default_value_t = 0.2)]
    distractors: f64,
    #[arg(long, default_value_t = 2000)]
    pool_size: usize,
    #[arg(long, default_value_t = 50)]
    val_per_task: usize,
    #[arg(long, default_value_t = 5)]
    tasks: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    feature_dim: usize,
}

#[derive(Args)]
struct TrainerArgs {
    /// Trainer seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    warmup_ratio: f64,
}

#[derive(Args)]
struct WorldArgs {
    /// Manifest of raw synthetic features, as written by gen-synth.
    #[arg(long)]
    manifest: PathBuf,
    /// Label file; defaults to world.json next to the manifest.
    #[arg(long)]
    world: Option<PathBuf>,
}

#[derive(Args)]
struct WarmupArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[command(flatten)]
    trainer: TrainerArgs,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradsArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long)]
    model: PathBuf,
    /// Output directory for gradient shards and their manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    proj_dim: usize,
    /// Projection seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    block_rows: usize,
}

#[derive(Args)]
struct InfluenceArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output score table; the sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    block_rows: usize,
    /// Use plain inner products on shards that are not normalized.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "ratio", required = true)]
    ratios: Vec<f64>,
    #[arg(long = "strategy", default_value = "vote")]
    strategies: Vec<String>,
    /// Recorded in every report.
    #[arg(long)]
    seed: Option<u64>,
    /// Write aggregate keys instead of selections.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "ratio", default_values_t = [0.05, 0.2, 0.5, 0.9])]
    ratios: Vec<f64>,
}

#[derive(Args)]
struct OverlapArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    ratio: f64,
    /// Newline-delimited ids of the generalist selection.
    #[arg(long)]
    selection: PathBuf,
    /// Another id list to compare the selection against.
    #[arg(long)]
    other: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[command(flatten)]
    trainer: TrainerArgs,
    #[arg(long)]
    selection: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("ICONS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("ICONS_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot size worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match cli.command {
        Command::GenSynth(a) => commands::gen_synth(&a),
        Command::Warmup(a) => commands::warmup(&a),
        Command::Grads(a) => commands::grads(&a),
        Command::Project(a) => commands::project(&a),
        Command::Influence(a) => commands::influence(&a),
        Command::Aggregate(a) => commands::select(&a, true),
        Command::Select(a) => commands::select(&a, a.dry_run),
        Command::Stats(a) => commands::stats(&a),
        Command::Overlap(a) => commands::overlap(&a),
        Command::Eval(a) => commands::eval(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Config => ("config", 2),
                ErrorKind::Validation => ("validation", 3),
                ErrorKind::Io => ("io", 4),
            };
            eprintln!("{}", serde_json::json!({ "error": kind, "message": e.to_string() }));
            ExitCode::from(code)
        }
    }
}
