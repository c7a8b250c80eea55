mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcan::datamodel::Dataset;
use gcan::explain::{explain_story, render_report, ReportFormat};
use gcan::harness::{ablation_suite, early_detection_sweep, evaluate, train_on_split, Metrics};
use gcan::model::{Checkpoint, Gcan, SplitRecord, Variant};
use gcan::synthgen::generate;
use gcan::{Error, Result};
use serde::Serialize;

use config::{require_path, RunConfig};

#[derive(Parser)]
#[command(
    name = "gcan",
    version,
    about = "Fake news detection on retweet cascades"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train on one split and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split it was trained against.
    Eval(EvalArgs),
    /// Repeated experiments over several retweeter budgets.
    Sweep(SweepArgs),
    /// Repeated experiments for the full model and every ablation.
    Ablate(AblateArgs),
    /// Attention report for one story.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelFlags {
    /// Split and initialization seed (the harness base seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Where to save the trained model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Retweeters per story.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated retweeter budgets.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    n: Vec<usize>,
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    story_id: String,
    /// Format printed to standard output.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Words and users listed in the summary.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_out<T: Serialize>(out: Option<PathBuf>, config: &RunConfig, value: &T) -> Result<()> {
    match out.or_else(|| config.paths.out.clone()) {
        Some(path) => write_json(&path, value),
        None => Ok(()),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    RunConfig::load_or_default(common.config.as_deref())
}

fn apply_model_flags(cfg: &mut RunConfig, flags: &ModelFlags) {
    if let Some(seed) = flags.seed {
        cfg.harness.base_seed = seed;
    }
    if let Some(variant) = flags.variant {
        cfg.model.variant = variant;
    }
    if let Some(epochs) = flags.epochs {
        cfg.model.epochs = epochs;
    }
}

fn metrics_line(name: &str, m: &Metrics) -> String {
    format!(
        "{name:<6} accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  (fake f1 {:.4})",
        m.accuracy, m.precision, m.recall, m.f1, m.fake_f1
    )
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.generator.seed = seed;
    }
    cfg.validate()?;
    let out = require_path(args.common.out, &cfg.paths.out, "out")?;
    let data = generate(&cfg.generator)?;
    data.write_jsonl(&out)?;
    let [real, fake] = data.label_counts();
    println!(
        "wrote {} stories to {} ({fake} fake, {real} real)",
        data.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    variant: Variant,
    split: SplitRecord,
    train_size: usize,
    test_size: usize,
    losses: Vec<f64>,
    train: Metrics,
    test: Metrics,
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_model_flags(&mut cfg, &args.model);
    if let Some(n) = args.n {
        cfg.model.n = n;
    }
    cfg.validate()?;
    let data = Dataset::load_jsonl(require_path(args.data, &cfg.paths.data, "data")?)?;
    let checkpoint = require_path(args.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
    let split = SplitRecord {
        seed: cfg.harness.seed(0),
        train_fraction: cfg.harness.train_fraction,
    };
    let trained = train_on_split(&data, &cfg.model, split.train_fraction, split.seed)?;
    let mut ckpt = trained.model.to_checkpoint();
    ckpt.split = Some(split);
    ckpt.save(&checkpoint)?;
    let report = TrainReport {
        variant: cfg.model.variant,
        split,
        train_size: trained.train.len(),
        test_size: trained.test.len(),
        train: evaluate(&trained.model, &trained.train)?,
        test: evaluate(&trained.model, &trained.test)?,
        losses: trained.losses,
    };
    println!(
        "variant {}  seed {}  train {}  test {}  final loss {:.4}",
        report.variant,
        split.seed,
        report.train_size,
        report.test_size,
        report.losses.last().copied().unwrap_or(f64::NAN)
    );
    println!("{}", metrics_line("train", &report.train));
    println!("{}", metrics_line("test", &report.test));
    println!("checkpoint {}", checkpoint.display());
    write_out(args.common.out, &cfg, &report)
}

fn load_model(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<(Gcan, Option<SplitRecord>)> {
    let ckpt = Checkpoint::load(require_path(flag, &cfg.paths.checkpoint, "checkpoint")?)?;
    let split = ckpt.split;
    Ok((Gcan::from_checkpoint(ckpt)?, split))
}

#[derive(Serialize)]
struct EvalReport {
    split: Option<SplitRecord>,
    evaluated: usize,
    metrics: Metrics,
}

fn eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    cfg.validate()?;
    let (model, split_record) = load_model(args.checkpoint, &cfg)?;
    let data = Dataset::load_jsonl(require_path(args.data, &cfg.paths.data, "data")?)?;
    let test = match split_record {
        Some(s) => gcan::datamodel::split(&data, s.train_fraction, s.seed)?.1,
        None => data,
    };
    let report = EvalReport {
        split: split_record,
        evaluated: test.len(),
        metrics: evaluate(&model, &test)?,
    };
    println!("evaluated {} stories", report.evaluated);
    println!("{}", metrics_line("test", &report.metrics));
    write_out(args.common.out, &cfg, &report)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_model_flags(&mut cfg, &args.model);
    if let Some(r) = args.repeats {
        cfg.harness.repeats = r;
    }
    cfg.validate()?;
    let data = Dataset::load_jsonl(require_path(args.data, &cfg.paths.data, "data")?)?;
    let report = early_detection_sweep(&data, &cfg.model, &args.n, &cfg.harness)?;
    print!("{}", report.to_text());
    write_out(args.common.out, &cfg, &report)
}

fn ablate(args: AblateArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.harness.base_seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.model.epochs = epochs;
    }
    if let Some(r) = args.repeats {
        cfg.harness.repeats = r;
    }
    cfg.validate()?;
    let data = Dataset::load_jsonl(require_path(args.data, &cfg.paths.data, "data")?)?;
    let report = ablation_suite(&data, &cfg.model, &cfg.harness)?;
    print!("{}", report.to_text());
    write_out(args.common.out, &cfg, &report)
}

fn explain(args: ExplainArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    cfg.validate()?;
    let (model, _) = load_model(args.checkpoint, &cfg)?;
    let data = Dataset::load_jsonl(require_path(args.data, &cfg.paths.data, "data")?)?;
    let story = data
        .find(&args.story_id)
        .ok_or_else(|| Error::InvalidInput(format!("no story with id {:?}", args.story_id)))?;
    let report = explain_story(&model, story, args.top_k)?;
    println!("{}", render_report(&report, args.format)?.trim_end());
    write_out(args.common.out, &cfg, &report)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Ablate(a) => ablate(a),
        Command::Explain(a) => explain(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
