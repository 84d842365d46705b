//! Trains briefly, saves a checkpoint, loads it back and shows that both
//! copies score the test split identically.

use grounding::model::{load_checkpoint, save_checkpoint};
use grounding::query::build_vocab;
use grounding::synth::{generate_split, DataConfig, Split};
use grounding::train::{evaluate, train, ModelConfig, TrainConfig, TrainingSet};

fn main() -> grounding::Result<()> {
    let data = DataConfig { train_size: 400, val_size: 50, test_size: 200, ..DataConfig::default() };
    let train_records = generate_split(&data, Split::Train)?;
    let queries: Vec<Vec<String>> = train_records.iter().map(|r| r.query.clone()).collect();
    let set = TrainingSet::from_records(build_vocab(&queries, 1)?, data.d_v, &train_records, &generate_split(&data, Split::Val)?)?;
    let outcome = train(&TrainConfig { iterations: 150, val_every: 50, ..TrainConfig::default() }, &ModelConfig::default(), &set)?;

    let path = std::env::temp_dir().join("grounding-example.ckpt");
    save_checkpoint(&outcome.best, &path)?;
    let loaded = load_checkpoint(&path)?;
    let test = generate_split(&data, Split::Test)?;
    let header = data.header(Split::Test);
    let (a, _) = evaluate(&outcome.best, &header, &test)?;
    let (b, _) = evaluate(&loaded, &header, &test)?;
    println!("{} ({} bytes)", path.display(), std::fs::metadata(&path).map_err(|e| grounding::Error::io(&path, e))?.len());
    println!("in memory: accuracy {:.3}  unrefined {:.3}", a.accuracy, a.unrefined_accuracy);
    println!("reloaded:  accuracy {:.3}  unrefined {:.3}", b.accuracy, b.unrefined_accuracy);
    println!("identical reports: {}", a == b);
    Ok(())
}
