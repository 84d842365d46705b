//! Loss-variant and proposal-quality ablations over several training seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::losses::RankingLoss;
use crate::model::GroundingSample;
use crate::query::build_vocab;
use crate::synth::{generate_split, measure_quality, DataConfig, QualityPreset, Split};
use crate::train::{evaluate_samples, samples_from_records, train, TrainConfig, TrainingSet};

pub const SOFTMAX: &str = "softmax";
pub const KLD: &str = "kld";
pub const SOFTMAX_REG: &str = "softmax+reg";
pub const KLD_REG: &str = "kld+reg";
pub const KLD_REG_LOW: &str = "kld+reg@low";
pub const KLD_REG_MID: &str = "kld+reg@mid";
pub const KLD_REG_ALL: &str = "kld+reg(all proposals)";

/// One row of the ablation: training overrides plus the proposal preset.
/// `preset: None` trains on the configured data as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub name: String,
    pub variant: RankingLoss,
    pub regression: bool,
    pub reg_mask_by_iou: bool,
    pub preset: Option<QualityPreset>,
}

impl AblationCell {
    pub fn new(name: &str, variant: RankingLoss, regression: bool, reg_mask_by_iou: bool) -> Self {
        Self {
            name: name.to_string(),
            variant,
            regression,
            reg_mask_by_iou,
            preset: None,
        }
    }

    pub fn on(mut self, preset: QualityPreset) -> Self {
        self.preset = Some(preset);
        self
    }

    fn train_config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            variant: self.variant,
            regression: self.regression,
            reg_mask_by_iou: self.reg_mask_by_iou,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub cells: Vec<AblationCell>,
    pub seeds: Vec<u64>,
}

impl AblationSpec {
    /// The four loss variants on the configured data, the full loss on the
    /// low and mid presets, and optionally the full loss with every proposal
    /// regressed.
    pub fn standard(cfg: &RunConfig) -> Self {
        let mask = cfg.train.reg_mask_by_iou;
        let mut cells = vec![
            AblationCell::new(SOFTMAX, RankingLoss::SoftmaxSingleLabel, false, mask),
            AblationCell::new(KLD, RankingLoss::Kld, false, mask),
            AblationCell::new(SOFTMAX_REG, RankingLoss::SoftmaxSingleLabel, true, mask),
            AblationCell::new(KLD_REG, RankingLoss::Kld, true, mask),
            AblationCell::new(KLD_REG_LOW, RankingLoss::Kld, true, mask).on(QualityPreset::Low),
            AblationCell::new(KLD_REG_MID, RankingLoss::Kld, true, mask).on(QualityPreset::Mid),
        ];
        if mask && cfg.ablation.include_unmasked_regression {
            cells.push(AblationCell::new(KLD_REG_ALL, RankingLoss::Kld, true, false));
        }
        Self {
            cells,
            seeds: cfg.ablation.seeds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub unrefined_accuracy: Option<f64>,
    pub best_iteration: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub name: String,
    pub data: String,
    pub variant: RankingLoss,
    pub regression: bool,
    pub reg_mask_by_iou: bool,
    pub seeds: Vec<SeedResult>,
    /// Statistics over the seeds; absent when any seed failed.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub unrefined_mean: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub data: String,
    pub fingerprint: String,
    pub s_dis: f64,
    pub s_div: Option<f64>,
    pub s_div_reason: Option<String>,
    pub degenerate_test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_fingerprint: String,
    pub datasets: Vec<DatasetReport>,
    pub cells: Vec<CellReport>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ReportLine<'a> {
    Run { config_fingerprint: &'a str },
    Dataset(&'a DatasetReport),
    Cell(&'a CellReport),
    Verdict(&'a Verdict),
}

fn data_label(preset: Option<QualityPreset>) -> String {
    preset.map_or_else(|| "config".to_string(), |p| p.name().to_string())
}

struct PreparedData {
    label: String,
    set: TrainingSet,
    test: Vec<GroundingSample>,
    report: DatasetReport,
}

fn prepare(cfg: &DataConfig, label: String) -> Result<PreparedData> {
    let train_records = generate_split(cfg, Split::Train)?;
    let queries: Vec<Vec<String>> = train_records.iter().map(|r| r.query.clone()).collect();
    let vocab = build_vocab(&queries, 1)?;
    let val_records = generate_split(cfg, Split::Val)?;
    let test_records = generate_split(cfg, Split::Test)?;
    let quality = measure_quality(&test_records)?;
    let test = samples_from_records(&test_records, &vocab)?;
    let set = TrainingSet::from_records(vocab, cfg.d_v, &train_records, &val_records)?;
    Ok(PreparedData {
        report: DatasetReport {
            data: label.clone(),
            fingerprint: cfg.fingerprint(),
            s_dis: quality.s_dis,
            s_div: quality.s_div,
            s_div_reason: quality.s_div_reason,
            degenerate_test_samples: quality.degenerate_samples,
        },
        label,
        set,
        test,
    })
}

fn run_one(cfg: &RunConfig, cell: &AblationCell, data: &PreparedData, seed: u64) -> SeedResult {
    let outcome = train(&cell.train_config(&cfg.train, seed), &cfg.model, &data.set)
        .and_then(|o| evaluate_samples(&o.best, &data.test, &o.best.fingerprint()).map(|r| (o.best_iteration, r.0)));
    match outcome {
        Ok((best_iteration, report)) => SeedResult {
            seed,
            accuracy: Some(report.accuracy),
            unrefined_accuracy: Some(report.unrefined_accuracy),
            best_iteration: Some(best_iteration),
            error: None,
        },
        Err(e) => SeedResult {
            seed,
            accuracy: None,
            unrefined_accuracy: None,
            best_iteration: None,
            error: Some(e.to_string()),
        },
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn summarize(cell: &AblationCell, seeds: Vec<SeedResult>) -> CellReport {
    let acc: Option<Vec<f64>> = seeds.iter().map(|s| s.accuracy).collect();
    let raw: Option<Vec<f64>> = seeds.iter().map(|s| s.unrefined_accuracy).collect();
    let failed = acc.is_none() || seeds.is_empty();
    let stats = acc.filter(|a| !a.is_empty());
    CellReport {
        name: cell.name.clone(),
        data: data_label(cell.preset),
        variant: cell.variant,
        regression: cell.regression,
        reg_mask_by_iou: cell.reg_mask_by_iou,
        mean: stats.as_deref().map(mean),
        min: stats.as_deref().map(|a| a.iter().copied().fold(f64::INFINITY, f64::min)),
        max: stats.as_deref().map(|a| a.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        unrefined_mean: raw.filter(|a| !a.is_empty()).as_deref().map(mean),
        seeds,
        failed,
    }
}

/// Strictly increasing means along `names`; `None` when a cell is absent.
fn increasing(cells: &BTreeMap<&str, &CellReport>, name: &str, names: &[&str]) -> Option<Verdict> {
    let found: Vec<&CellReport> = names.iter().map(|n| cells.get(n).copied()).collect::<Option<_>>()?;
    let means: Option<Vec<f64>> = found.iter().map(|c| c.mean).collect();
    let shown: Vec<String> = found
        .iter()
        .map(|c| format!("{}={}", c.name, c.mean.map_or("failed".into(), |m| format!("{m:.4}"))))
        .collect();
    let holds = means.is_some_and(|m| m.windows(2).all(|w| w[0] < w[1]));
    Some(Verdict {
        name: name.to_string(),
        holds,
        detail: shown.join(" < "),
    })
}

pub fn verdicts(report_cells: &[CellReport], datasets: &[DatasetReport]) -> Vec<Verdict> {
    let cells: BTreeMap<&str, &CellReport> = report_cells.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut out: Vec<Verdict> = [
        ("kld beats softmax", &[SOFTMAX, KLD][..]),
        ("regression helps softmax", &[SOFTMAX, SOFTMAX_REG][..]),
        ("regression helps kld", &[KLD, KLD_REG][..]),
        ("accuracy rises with proposal quality", &[KLD_REG_LOW, KLD_REG_MID, KLD_REG][..]),
    ]
    .iter()
    .filter_map(|(name, names)| increasing(&cells, name, names))
    .collect();

    let by_label: BTreeMap<&str, &DatasetReport> = datasets.iter().map(|d| (d.data.as_str(), d)).collect();
    if let (Some(low), Some(mid), Some(high)) = (by_label.get("low"), by_label.get("mid"), by_label.get("config")) {
        let gaps = [mid.s_dis - low.s_dis, high.s_dis - mid.s_dis];
        out.push(Verdict {
            name: "proposal presets separated by S_DIS >= 0.05".into(),
            holds: gaps.iter().all(|&g| g >= 0.05),
            detail: format!("low={:.4} mid={:.4} high={:.4}", low.s_dis, mid.s_dis, high.s_dis),
        });
    }
    out
}

pub fn run_ablation(cfg: &RunConfig, spec: &AblationSpec) -> Result<RunReport> {
    cfg.validate()?;
    let mut presets: Vec<Option<QualityPreset>> = Vec::new();
    for c in &spec.cells {
        if !presets.contains(&c.preset) {
            presets.push(c.preset);
        }
    }
    let prepared = presets
        .par_iter()
        .map(|&p| {
            let data = DataConfig {
                quality: p.map_or_else(|| cfg.data.quality.clone(), QualityPreset::config),
                ..cfg.data.clone()
            };
            prepare(&data, data_label(p))
        })
        .collect::<Result<Vec<_>>>()?;
    let data_for = |cell: &AblationCell| {
        let label = data_label(cell.preset);
        prepared.iter().find(|d| d.label == label).expect("prepared above")
    };

    let jobs: Vec<(usize, u64)> = (0..spec.cells.len())
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<SeedResult> = jobs
        .par_iter()
        .map(|&(c, seed)| run_one(cfg, &spec.cells[c], data_for(&spec.cells[c]), seed))
        .collect();

    let mut per_cell: Vec<Vec<SeedResult>> = vec![Vec::new(); spec.cells.len()];
    for ((c, _), r) in jobs.iter().zip(results) {
        per_cell[*c].push(r);
    }
    let mut cells: Vec<CellReport> = spec
        .cells
        .iter()
        .zip(per_cell)
        .map(|(cell, seeds)| summarize(cell, seeds))
        .collect();
    cells.sort_by(|a, b| a.name.cmp(&b.name));

    let mut datasets: Vec<DatasetReport> = prepared.into_iter().map(|d| d.report).collect();
    datasets.sort_by(|a, b| a.data.cmp(&b.data));
    let verdicts = verdicts(&cells, &datasets);
    Ok(RunReport {
        config_fingerprint: cfg.data.fingerprint(),
        datasets,
        cells,
        verdicts,
    })
}

impl RunReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn cell(&self, name: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![ReportLine::Run {
            config_fingerprint: &self.config_fingerprint,
        }];
        lines.extend(self.datasets.iter().map(ReportLine::Dataset));
        lines.extend(self.cells.iter().map(ReportLine::Cell));
        lines.extend(self.verdicts.iter().map(ReportLine::Verdict));
        lines
            .iter()
            .map(|l| serde_json::to_string(l).expect("report serializes") + "\n")
            .collect()
    }

    pub fn to_table(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        let _ = writeln!(out, "data: {}", self.config_fingerprint);
        let _ = writeln!(out, "\n{:<8} {:>7} {:>7} {:>6}", "data", "S_DIS", "S_DIV", "degen");
        for d in &self.datasets {
            let _ = writeln!(
                out,
                "{:<8} {:>7.4} {:>7} {:>6}",
                d.data,
                d.s_dis,
                f(d.s_div),
                d.degenerate_test_samples
            );
        }
        let _ = writeln!(
            out,
            "\n{:<24} {:<7} {:>7} {:>7} {:>7} {:>9}  per seed",
            "cell", "data", "mean", "min", "max", "unrefined"
        );
        for c in &self.cells {
            let per_seed: Vec<String> = c
                .seeds
                .iter()
                .map(|s| match (s.accuracy, &s.error) {
                    (Some(a), _) => format!("{}:{a:.4}", s.seed),
                    (None, Some(e)) => format!("{}:failed ({e})", s.seed),
                    (None, None) => format!("{}:failed", s.seed),
                })
                .collect();
            let _ = writeln!(
                out,
                "{:<24} {:<7} {:>7} {:>7} {:>7} {:>9}  {}",
                c.name,
                c.data,
                f(c.mean),
                f(c.min),
                f(c.max),
                f(c.unrefined_mean),
                per_seed.join(" ")
            );
        }
        if !self.verdicts.is_empty() {
            let _ = writeln!(out);
            for v in &self.verdicts {
                let _ = writeln!(out, "[{}] {}: {}", if v.holds { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
        }
        out
    }
}
