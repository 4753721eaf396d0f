//! `advjudge`: run the detector experiment stage by stage or end to end.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use advjudge_core::pipeline::{DatasetConfig, DatasetKind, ExperimentConfig, Runner, Stage};
use advjudge_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "advjudge", version, about = "Detect adversarial images from prediction divergence under transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Train the target classifier.
    TrainClassifier,
    /// Build the FGSM, BIM and C&W corpora.
    Attack,
    /// Score every benign and adversarial image under the transform suite.
    Score,
    /// Fit one threshold detector per transform.
    FitThreshold,
    /// Train the judge network on the score vectors.
    TrainJudge,
    /// Evaluate all detectors on the test split.
    Evaluate,
    /// Integrated-gradients attribution for the judge.
    Attribute,
    /// Run every stage that is not already complete.
    RunAll,
    /// Print the resolved configuration as JSON.
    ShowConfig,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Desk,
    Smoke,
}

#[derive(Args, Debug)]
struct Opts {
    /// Experiment config JSON. Without it a preset is built.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given.
    #[arg(long, global = true, value_enum, default_value = "desk")]
    preset: Preset,
    /// Global seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset directory (CIFAR-10 binary batches or MNIST IDX files).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Dataset format of `--data-dir`.
    #[arg(long, global = true, value_enum)]
    dataset: Option<DatasetArg>,
    #[arg(long, global = true)]
    train_limit: Option<usize>,
    #[arg(long, global = true)]
    classifier_epochs: Option<usize>,
    #[arg(long, global = true)]
    judge_epochs: Option<usize>,
    #[arg(long, global = true)]
    attribution_steps: Option<usize>,
    /// Skip the per-parameter transform sweep.
    #[arg(long, global = true)]
    no_sweep: bool,
    /// No progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DatasetArg {
    Cifar10,
    Mnist,
}

fn resolve(opts: &Opts) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let root = std::env::current_dir().map_err(|e| Error::Io {
                path: ".".into(),
                source: e,
            })?;
            let dataset = DatasetConfig::locate(&root);
            let seed = opts.seed.unwrap_or(0);
            match opts.preset {
                Preset::Desk => ExperimentConfig::desk(dataset, seed, PathBuf::new()),
                Preset::Smoke => ExperimentConfig::smoke(dataset, seed, PathBuf::new()),
            }
        }
    };
    if let Some(dir) = &opts.data_dir {
        cfg.dataset.dir = dir.clone();
    }
    if let Some(kind) = opts.dataset {
        cfg.dataset.kind = match kind {
            DatasetArg::Cifar10 => DatasetKind::Cifar10,
            DatasetArg::Mnist => DatasetKind::Mnist,
        };
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    if opts.train_limit.is_some() {
        cfg.dataset.train_limit = opts.train_limit;
    }
    if let Some(n) = opts.classifier_epochs {
        cfg.classifier.epochs = n;
    }
    if let Some(n) = opts.judge_epochs {
        cfg.judge.epochs = n;
    }
    if let Some(n) = opts.attribution_steps {
        cfg.attribution_steps = n;
    }
    if opts.no_sweep {
        cfg.sweep = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stage_of(cmd: Command) -> Option<Stage> {
    Some(match cmd {
        Command::TrainClassifier => Stage::TrainClassifier,
        Command::Attack => Stage::Attack,
        Command::Score => Stage::Score,
        Command::FitThreshold => Stage::FitThreshold,
        Command::TrainJudge => Stage::TrainJudge,
        Command::Evaluate => Stage::Evaluate,
        Command::Attribute => Stage::Attribute,
        Command::RunAll | Command::ShowConfig => return None,
    })
}

fn run(cli: &Cli) -> Result<serde_json::Value, Error> {
    let cfg = resolve(&cli.opts)?;
    if cli.command == Command::ShowConfig {
        return Ok(serde_json::to_value(&cfg)?);
    }
    let runner = Runner::new(cfg)?.quiet(cli.opts.quiet);
    match stage_of(cli.command) {
        Some(stage) => Ok(serde_json::to_value(runner.run(stage)?)?),
        None => Ok(serde_json::to_value(runner.run_all()?)?),
    }
}

fn error_json(e: &Error) -> serde_json::Value {
    let (stage, cause) = match e {
        Error::Stage { stage, source } => (Some(stage.as_str()), source.to_string()),
        other => (None, other.to_string()),
    };
    json!({"kind": e.kind(), "message": cause, "stage": stage})
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = json!({"kind": "usage", "message": e.to_string().trim_end(), "stage": null});
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(v) => {
            // A closed pipe downstream is not a failure of the run.
            let _ = writeln!(std::io::stdout().lock(), "{v:#}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
