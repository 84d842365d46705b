//! Writes a small dataset directory, reads it back and prints one record.
//!
//! cargo run --release --example generate_dataset [out_dir]

use std::path::PathBuf;

use grounding::synth::{generate_dataset, load_vocab, read_dataset, split_path, DataConfig, Split};

fn main() -> grounding::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("grounding-data"));
    let cfg = DataConfig { train_size: 200, val_size: 50, test_size: 100, ..DataConfig::default() };
    let summary = generate_dataset(&cfg, &dir, true)?;
    println!("{}  vocabulary {} tokens", summary.fingerprint, summary.vocab_size);
    for s in &summary.splits {
        let q = s.quality.as_ref().expect("non-empty split");
        println!("  {:<5} {:>4} records  S_DIS {:.3}  degenerate {}", s.split.name(), s.records, q.s_dis, q.degenerate_samples);
    }

    let (header, records) = read_dataset(&split_path(&dir, Split::Test))?;
    let vocab = load_vocab(&dir)?;
    let r = &records[0];
    println!("\nheader {header:?}");
    println!("record {}: \"{}\"  gt {:?}", r.id, r.query.join(" "), r.gt.to_array());
    for (i, p) in r.proposals.iter().enumerate() {
        println!("  proposal {i}: box {:?}  iou {:.2}", p.bbox.to_array().map(|v| v.round()), grounding::geometry::iou(&p.bbox, &r.gt));
    }
    println!("token ids {:?}", r.to_sample(&vocab)?.tokens.0);
    Ok(())
}
