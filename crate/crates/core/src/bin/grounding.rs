use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use grounding::ablation::{run_ablation, AblationSpec};
use grounding::config::RunConfig;
use grounding::losses::RankingLoss;
use grounding::model::{load_checkpoint, save_checkpoint};
use grounding::synth::{fingerprint_d_v, generate_dataset, load_vocab, read_dataset, split_path, Split};
use grounding::train::{evaluate, train, write_log, TrainConfig, TrainingSet};
use grounding::{Error, Result};

/// Phrase-to-box grounding: synthetic data, training, evaluation, ablations.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (dotted-key TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the command's seed (data seed for generate/ablate, training seed for train).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace existing outputs.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/val/test splits and the training vocabulary.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model and write its log and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory (defaults to paths.data_dir).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Ranking loss: kld or softmax_single_label.
        #[arg(long)]
        variant: Option<RankingLoss>,
        /// Train without the regression term.
        #[arg(long)]
        no_regression: bool,
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Score a checkpoint on one dataset split file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split file, e.g. data/test.jsonl.
        #[arg(long)]
        data: PathBuf,
    },
    /// Train every ablation cell for every seed and report the orderings.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<u64>,
    },
}

/// A missing or unreadable input is a rejected request, not a runtime abort.
fn input<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
        other => other,
    })
}

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => input(RunConfig::load(path)),
        None => Ok(RunConfig::default()),
    }
}

fn prepare_out(dir: &Path, files: &[&str], overwrite: bool) -> Result<()> {
    if !overwrite {
        if let Some(f) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(Error::Config(format!("{} already exists (pass --overwrite)", f.display())));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_generate(common: Common) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(seed) = common.seed {
        cfg.data.seed = seed;
    }
    let out = common.out.unwrap_or(cfg.paths.data_dir);
    let summary = generate_dataset(&cfg.data, &out, common.overwrite)?;
    println!("{}", summary.fingerprint);
    for s in &summary.splits {
        let q = s.quality.as_ref();
        println!(
            "{:<5} {:>5} records  S_DIS {}  -> {}",
            s.split.name(),
            s.records,
            q.map_or("-".into(), |q| format!("{:.4}", q.s_dis)),
            s.path.display()
        );
    }
    println!("vocabulary: {} tokens", summary.vocab_size);
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    data_fingerprint: &'a str,
    model_fingerprint: String,
    best_iteration: u64,
    best_val_accuracy: Option<f64>,
    config: &'a TrainConfig,
}

fn cmd_train(
    common: Common,
    data: Option<PathBuf>,
    variant: Option<RankingLoss>,
    no_regression: bool,
    iterations: Option<u64>,
) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    if let Some(v) = variant {
        cfg.train.variant = v;
    }
    if no_regression {
        cfg.train.regression = false;
    }
    if let Some(n) = iterations {
        cfg.train.iterations = n;
    }
    cfg.validate()?;
    let data_dir = data.unwrap_or(cfg.paths.data_dir.clone());
    let out = common.out.unwrap_or_else(|| PathBuf::from("runs/train"));

    let vocab = input(load_vocab(&data_dir))?;
    let (train_header, train_records) = input(read_dataset(&split_path(&data_dir, Split::Train)))?;
    let (val_header, val_records) = input(read_dataset(&split_path(&data_dir, Split::Val)))?;
    if train_header.fingerprint != val_header.fingerprint {
        return Err(Error::Config(format!(
            "train and val splits come from different generators ({} vs {})",
            train_header.fingerprint, val_header.fingerprint
        )));
    }
    let d_v = fingerprint_d_v(&train_header.fingerprint)
        .ok_or_else(|| Error::Config(format!("no d_v in fingerprint {}", train_header.fingerprint)))?;
    if d_v != cfg.data.d_v {
        return Err(Error::Dimension(format!(
            "dataset has d_v = {d_v}, config expects data.d_v = {}",
            cfg.data.d_v
        )));
    }
    let set = TrainingSet::from_records(vocab, d_v, &train_records, &val_records)?;
    prepare_out(&out, &["log.csv", "best.ckpt", "final.ckpt", "summary.json"], common.overwrite)?;

    let outcome = train(&cfg.train, &cfg.model, &set)?;
    write_log(&out.join("log.csv"), &outcome.log)?;
    save_checkpoint(&outcome.best, &out.join("best.ckpt"))?;
    save_checkpoint(&outcome.last, &out.join("final.ckpt"))?;
    write_json(
        &out.join("summary.json"),
        &TrainSummary {
            data_fingerprint: &train_header.fingerprint,
            model_fingerprint: outcome.best.fingerprint(),
            best_iteration: outcome.best_iteration,
            best_val_accuracy: outcome.best_val_accuracy,
            config: &cfg.train,
        },
    )?;
    println!(
        "variant {}  regression {}  best iteration {}  val accuracy {}",
        cfg.train.variant.name(),
        cfg.train.regression,
        outcome.best_iteration,
        outcome.best_val_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval(common: Common, checkpoint: PathBuf, data: PathBuf) -> Result<()> {
    let model = input(load_checkpoint(&checkpoint))?;
    let (header, records) = input(read_dataset(&data))?;
    let (report, rows) = evaluate(&model, &header, &records)?;
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    println!("{text}");
    if let Some(out) = common.out {
        prepare_out(&out, &["report.json", "predictions.jsonl"], common.overwrite)?;
        write_json(&out.join("report.json"), &report)?;
        let dump: String = rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
            .collect();
        let path = out.join("predictions.jsonl");
        fs::write(&path, dump).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn cmd_ablate(common: Common, iterations: Option<u64>) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(seed) = common.seed {
        cfg.data.seed = seed;
    }
    if let Some(n) = iterations {
        cfg.train.iterations = n;
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from("runs/ablation"));
    prepare_out(&out, &["ablation.txt", "ablation.jsonl"], common.overwrite)?;
    let report = run_ablation(&cfg, &AblationSpec::standard(&cfg))?;
    let table = report.to_table();
    print!("{table}");
    for (name, body) in [("ablation.txt", table), ("ablation.jsonl", report.to_jsonl())] {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate { common } => cmd_generate(common),
        Command::Train {
            common,
            data,
            variant,
            no_regression,
            iterations,
        } => cmd_train(common, data, variant, no_regression, iterations),
        Command::Eval {
            common,
            checkpoint,
            data,
        } => cmd_eval(common, checkpoint, data),
        Command::Ablate { common, iterations } => cmd_ablate(common, iterations),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_runtime() { 2 } else { 1 })
        }
    }
}
