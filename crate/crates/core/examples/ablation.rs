//! Runs the loss-variant and proposal-quality ablation of a profile and
//! prints the report table.
//!
//! cargo run --release --example ablation [profile] [iterations]

use std::path::PathBuf;
use std::time::Instant;

use grounding::ablation::{run_ablation, AblationSpec};
use grounding::config::RunConfig;

fn main() -> grounding::Result<()> {
    let mut args = std::env::args().skip(1);
    let profile = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../profiles/desk.cfg")));
    let mut cfg = RunConfig::load(&profile)?;
    if let Some(iterations) = args.next().and_then(|s| s.parse().ok()) {
        cfg.train.iterations = iterations;
    }
    let start = Instant::now();
    let report = run_ablation(&cfg, &AblationSpec::standard(&cfg))?;
    print!("{}", report.to_table());
    eprintln!("finished in {:.0}s", start.elapsed().as_secs_f64());
    Ok(())
}
