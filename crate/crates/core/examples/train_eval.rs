//! Generates a desk-scale dataset in memory, trains one model and reports
//! test metrics.
//!
//! cargo run --release --example train_eval [iterations] [variant] [reg|noreg|masked] [preset] [seed]

use std::time::Instant;

use grounding::query::build_vocab;
use grounding::synth::{generate_split, DataConfig, QualityPreset, Split};
use grounding::train::{evaluate_samples, samples_from_records, train, ModelConfig, TrainConfig, TrainingSet};

fn main() -> grounding::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(String::as_str);
    let preset: QualityPreset = arg(3).unwrap_or("high").parse()?;
    let data = DataConfig {
        quality: preset.config(),
        ..DataConfig::default()
    };
    let cfg = TrainConfig {
        iterations: arg(0).and_then(|s| s.parse().ok()).unwrap_or(1000),
        variant: arg(1).unwrap_or("kld").parse().map_err(grounding::Error::Config)?,
        regression: arg(2) != Some("noreg"),
        reg_mask_by_iou: arg(2) == Some("masked"),
        seed: arg(4).and_then(|s| s.parse().ok()).unwrap_or(1),
        ..TrainConfig::default()
    };

    let train_records = generate_split(&data, Split::Train)?;
    let queries: Vec<Vec<String>> = train_records.iter().map(|r| r.query.clone()).collect();
    let vocab = build_vocab(&queries, 1)?;
    let set = TrainingSet::from_records(vocab.clone(), data.d_v, &train_records, &generate_split(&data, Split::Val)?)?;
    let test = samples_from_records(&generate_split(&data, Split::Test)?, &vocab)?;

    let start = Instant::now();
    let outcome = train(&cfg, &ModelConfig::default(), &set)?;
    for e in outcome.log.iter().filter(|e| e.val_accuracy.is_some()) {
        println!(
            "iter {:>5}  loss {:.4}  rank {:.4}  reg {}  val {:.3}",
            e.iteration,
            e.total_loss,
            e.rank_loss,
            e.reg_loss.map_or("-".into(), |r| format!("{r:.4}")),
            e.val_accuracy.unwrap()
        );
    }
    let (report, _) = evaluate_samples(&outcome.best, &test, &outcome.best.fingerprint())?;
    println!(
        "best iter {}  test acc {:.3}  unrefined {:.3}  S_DIS {:.3}  ({:.1}s)",
        outcome.best_iteration,
        report.accuracy,
        report.unrefined_accuracy,
        report.quality.s_dis,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
