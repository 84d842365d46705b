//! Measures discrimination and diversity of the three proposal presets,
//! plus a perfect generator and one that misses everything.
//!
//! cargo run --release --example proposal_quality [samples]

use grounding::synth::{generate_split, measure_quality, DataConfig, ProposalQualityConfig, QualityPreset, Split};

fn main() -> grounding::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let mut rows: Vec<(String, ProposalQualityConfig)> = QualityPreset::ALL
        .iter()
        .map(|p| (p.name().to_string(), p.config()))
        .collect();
    rows.push(("perfect".into(), ProposalQualityConfig::perfect()));
    rows.push((
        "blind".into(),
        ProposalQualityConfig {
            miss_prob: 1.0,
            ..ProposalQualityConfig::perfect()
        },
    ));

    println!("{:<8} {:>6} {:>6} {:>9}", "preset", "S_DIS", "S_DIV", "degen");
    for (name, quality) in rows {
        let cfg = DataConfig {
            test_size: samples,
            quality,
            ..DataConfig::default()
        };
        let q = measure_quality(&generate_split(&cfg, Split::Test)?)?;
        let div = q.s_div.map_or_else(|| "undef".to_string(), |v| format!("{v:.3}"));
        println!("{name:<8} {:>6.3} {div:>6} {:>9}", q.s_dis, q.degenerate_samples);
    }
    Ok(())
}
