use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use survclust::config::RunConfig;
use survclust::data::write_atomic;
use survclust::evaluate::{recovery_report, run_cv_experiment, train_ordered, FoldPlan};
use survclust::neural::{forward, Activation, Checkpoint};
use survclust::report::{
    cluster_curves, config_hash, cv_text, history_csv, km_csv, km_svg, recovery_text,
    REPORT_SCHEMA_VERSION,
};
use survclust::simulate::{digits_cohort, generate_cohort, Censoring, DigitGrouping, DigitImages};
use survclust::{Cohort, Result, Standardizer};

#[derive(Parser)]
#[command(name = "survclust", version, about = "Survival-driven clustering")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV.
    Simulate(SimulateArgs),
    /// Build a survival cohort from an 8x8 digits CSV.
    DigitsPrep(DigitsArgs),
    /// Train a clusterer on a cohort CSV.
    Train(TrainArgs),
    /// Apply a checkpoint to a cohort and report.
    Evaluate(EvaluateArgs),
    /// k-fold cross-validation on a cohort CSV or a generated preset.
    Cv(CvArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    censor_scale: Option<f64>,
    #[arg(long)]
    admin_horizon: Option<f64>,
}

#[derive(Args)]
struct DigitsArgs {
    /// CSV with a `label` column and 64 pixel columns.
    #[arg(long)]
    digits: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grouping_seed: Option<u64>,
}

#[derive(Args, Default)]
struct Hyper {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    penalty_weight: Option<f64>,
    /// Use the digits reference settings as the base instead of the file's.
    #[arg(long)]
    digits_defaults: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write km.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct CvArgs {
    /// Cohort CSV; a preset cohort is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    hyper: Hyper,
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        other => Err(format!("unknown activation `{other}` (relu or tanh)")),
    }
}

impl Hyper {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.digits_defaults {
            cfg.train = survclust::config::TrainSection::digits_reference();
        }
        let t = &mut cfg.train;
        if let Some(v) = &self.hidden {
            t.hidden = v.clone();
        }
        if let Some(v) = self.clusters {
            t.clusters = v;
        }
        if let Some(v) = self.activation {
            t.activation = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = self.penalty_weight {
            t.penalty_weight = v;
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_cohort(path: &Path, cohort: &Cohort) -> Result<()> {
    let mut buf = Vec::new();
    cohort.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn simulate(mut cfg: RunConfig, a: SimulateArgs) -> Result<()> {
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let s = &mut cfg.simulate;
    if let Some(v) = a.preset {
        s.preset = v;
    }
    if let Some(v) = a.n {
        s.n = v;
    }
    if let Some(v) = a.censor_scale {
        s.censor_scale = v;
    }
    if let Some(v) = a.admin_horizon {
        s.admin_horizon = v;
    }
    let spec = cfg.simulate.cohort_spec(cfg.seed)?;
    let cohort = generate_cohort(&spec)?;
    write_cohort(&a.out, &cohort)?;
    let meta = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "simulate",
        "seed": cfg.seed,
        "config_hash": config_hash(&cfg.simulate)?,
        "cohort_spec": spec,
        "subjects": cohort.len(),
        "censoring_rate": cohort.censoring_rate(),
    });
    write_json(&sidecar(&a.out), &meta)?;
    println!(
        "wrote {} subjects ({:.1}% censored) to {}",
        cohort.len(),
        100.0 * cohort.censoring_rate(),
        a.out.display()
    );
    Ok(())
}

fn digits_prep(mut cfg: RunConfig, a: DigitsArgs) -> Result<()> {
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.grouping_seed {
        cfg.digits.grouping_seed = Some(v);
    }
    let grouping = DigitGrouping::seeded(cfg.digits.grouping_seed.unwrap_or(cfg.seed));
    let censoring = Censoring {
        censor_scale: cfg.digits.censor_scale,
        admin_horizon: cfg.digits.admin_horizon,
    };
    let images = DigitImages::load(&a.digits)?;
    let cohort = digits_cohort(&images, &grouping, &censoring, cfg.seed)?;
    write_cohort(&a.out, &cohort)?;
    let meta = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "digits-prep",
        "seed": cfg.seed,
        "config_hash": config_hash(&cfg.digits)?,
        "grouping": grouping,
        "censoring": censoring,
        "subjects": cohort.len(),
        "censoring_rate": cohort.censoring_rate(),
    });
    write_json(&sidecar(&a.out), &meta)?;
    println!("wrote {} subjects to {}", cohort.len(), a.out.display());
    Ok(())
}

fn train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    a.hyper.apply(&mut cfg);
    let cohort = Cohort::load(&a.input)?;
    let standardizer = Standardizer::fit(&cohort.features)?;
    let x = standardizer.transform(&cohort.features)?;
    let spec = cfg.train.network_spec(x.cols(), cfg.seed)?;
    let train_cfg = cfg.train.train_config(cfg.seed)?;
    let loss_cfg = cfg.train.loss_config()?;
    let outcome = train_ordered(&spec, &x, &cohort.records, &train_cfg, &loss_cfg)?;

    let hash = config_hash(&cfg)?;
    let mut ckpt = Checkpoint::new(&outcome.params, cfg.seed, Some(standardizer));
    ckpt.config_hash = Some(hash.clone());
    std::fs::create_dir_all(&a.out_dir)?;
    write_atomic(&a.out_dir.join("checkpoint.json"), ckpt.to_json()?.as_bytes())?;
    write_atomic(&a.out_dir.join("history.csv"), history_csv(&outcome.history).as_bytes())?;
    write_json(
        &a.out_dir.join("train.meta.json"),
        &json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "command": "train",
            "seed": cfg.seed,
            "config_hash": hash,
            "config": cfg,
            "initial": outcome.initial,
            "final": outcome.history.last(),
            "skipped_batches": outcome.skipped_batches,
        }),
    )?;
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "objective {:.4} -> {:.4} after {} epochs; checkpoint in {}",
        outcome.initial.objective,
        last.objective,
        outcome.history.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ckpt = Checkpoint::from_json(&std::fs::read_to_string(&a.checkpoint)?)?;
    let params = ckpt.params()?;
    let cohort = Cohort::load(&a.input)?;
    let x = match &ckpt.standardizer {
        Some(s) => s.transform(&cohort.features)?,
        None => cohort.features.clone(),
    };
    let soft = forward(&params, &x)?;
    let report = recovery_report(&soft, &cohort.records, cohort.truth.as_deref())?;
    let labels = soft.argmax();
    let curves = cluster_curves(&cohort.records, &labels, params.k());

    std::fs::create_dir_all(&a.out_dir)?;
    write_json(
        &a.out_dir.join("report.json"),
        &json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "command": "evaluate",
            "seed": ckpt.seed,
            "config_hash": ckpt.config_hash,
            "report": report,
        }),
    )?;
    let text = recovery_text(&format!("evaluation of {}", a.input.display()), &report);
    write_atomic(&a.out_dir.join("report.txt"), text.as_bytes())?;
    write_atomic(&a.out_dir.join("km.csv"), km_csv(&curves).as_bytes())?;
    if a.svg {
        write_atomic(&a.out_dir.join("km.svg"), km_svg(&curves).as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn cv(mut cfg: RunConfig, a: CvArgs) -> Result<()> {
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.folds {
        cfg.cv.folds = v;
    }
    if let Some(v) = a.preset {
        cfg.simulate.preset = v;
    }
    if let Some(v) = a.n {
        cfg.simulate.n = v;
    }
    a.hyper.apply(&mut cfg);
    let cohort = match &a.input {
        Some(path) => Cohort::load(path)?,
        None => generate_cohort(&cfg.simulate.cohort_spec(cfg.seed)?)?,
    };
    let spec = cfg.train.network_spec(cohort.features.cols(), cfg.seed)?;
    let train_cfg = cfg.train.train_config(cfg.seed)?;
    let loss_cfg = cfg.train.loss_config()?;
    let plan = FoldPlan::new(cohort.len(), cfg.cv.folds, cfg.seed)?;
    let report = run_cv_experiment(&cohort, &spec, &train_cfg, &loss_cfg, &plan)?;

    let pooled_records: Vec<_> = (0..plan.n_folds)
        .flat_map(|f| plan.test_indices(f).iter().map(|&i| cohort.records[i]))
        .collect();
    let curves = cluster_curves(&pooled_records, &report.pooled_labels, cfg.train.clusters);

    std::fs::create_dir_all(&a.out_dir)?;
    write_json(
        &a.out_dir.join("cv_report.json"),
        &json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "command": "cv",
            "seed": cfg.seed,
            "config_hash": config_hash(&cfg)?,
            "input": a.input.as_ref().map(|p| p.display().to_string()),
            "report": report,
        }),
    )?;
    let text = cv_text(&report);
    write_atomic(&a.out_dir.join("cv_report.txt"), text.as_bytes())?;
    write_atomic(&a.out_dir.join("km.csv"), km_csv(&curves).as_bytes())?;
    if a.svg {
        write_atomic(&a.out_dir.join("km.svg"), km_svg(&curves).as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let needs_config = !matches!(cli.command, Command::Evaluate(_));
    let cfg = if needs_config {
        RunConfig::load_or_default(cli.config.as_deref())?
    } else {
        RunConfig::default()
    };
    match cli.command {
        Command::Simulate(a) => simulate(cfg, a),
        Command::DigitsPrep(a) => digits_prep(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Evaluate(a) => evaluate(a),
        Command::Cv(a) => cv(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
