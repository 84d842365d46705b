//! Seeded synthetic grounding data: attributed scenes, template queries and
//! proposal sets of tunable quality.

mod io;
mod proposals;
mod scene;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_dataset, write_dataset, DatasetHeader, DatasetRecord, DATASET_SCHEMA};
pub use proposals::{
    generate_proposals, synthesize_background, synthesize_feature, FeatureBank, ProposalQualityConfig,
    QualityPreset,
};
pub use scene::{
    color_name, generate_query, generate_scene, query_lexicon, resolve_description, shape_name, Description,
    Relation, Scene, SceneConfig, SceneObject,
};

use crate::error::{Error, Result};
use crate::metrics::{proposal_quality, ProposalQuality, DEFAULT_IOU_THRESHOLD};
use crate::query::{build_vocab, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.name())
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// Proposals per sample.
    pub proposals: usize,
    pub d_v: usize,
    pub scene: SceneConfig,
    pub quality: ProposalQualityConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            train_size: 2000,
            val_size: 250,
            test_size: 500,
            proposals: 8,
            d_v: 32,
            scene: SceneConfig::default(),
            quality: QualityPreset::High.config(),
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.proposals == 0 || self.d_v == 0 {
            return Err(Error::Config("data.proposals and data.d_v must be positive".into()));
        }
        self.scene.validate()?;
        self.quality.validate()
    }

    pub fn size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_size,
            Split::Val => self.val_size,
            Split::Test => self.test_size,
        }
    }

    /// Identifies everything except the seed and the split sizes, so two
    /// files with the same fingerprint hold comparable samples.
    pub fn fingerprint(&self) -> String {
        let body = serde_json::to_string(&(&self.scene, &self.quality)).expect("config serializes");
        let hash = body
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        format!("d_v={};n={};gen={hash:016x}", self.d_v, self.proposals)
    }

    /// Prototype table; drawn from its own stream so every split shares it.
    pub fn feature_bank(&self) -> FeatureBank {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        FeatureBank::new(&mut rng, self.scene.num_classes, self.scene.num_colors, self.d_v)
    }

    pub fn header(&self, split: Split) -> DatasetHeader {
        DatasetHeader {
            schema: DATASET_SCHEMA,
            seed: self.seed,
            split: split.name().to_string(),
            fingerprint: self.fingerprint(),
        }
    }
}

/// `d_v` encoded in a dataset fingerprint.
pub fn fingerprint_d_v(fingerprint: &str) -> Option<usize> {
    fingerprint.split(';').find_map(|kv| kv.strip_prefix("d_v=")?.parse().ok())
}

pub fn sample_rng(seed: u64, split: Split, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((split.stream() << 48) | id);
    rng
}

pub fn generate_record(cfg: &DataConfig, bank: &FeatureBank, split: Split, id: u64) -> Result<DatasetRecord> {
    let mut rng = sample_rng(cfg.seed, split, id);
    let scene = generate_scene(&mut rng, &cfg.scene)?;
    let proposals = generate_proposals(&scene, &cfg.quality, bank, &mut rng, cfg.proposals);
    Ok(DatasetRecord {
        id,
        w: cfg.scene.image_width,
        h: cfg.scene.image_height,
        query: generate_query(&scene),
        gt: scene.objects[scene.target].bbox,
        proposals,
    })
}

/// Samples run in parallel; the result is in id order regardless.
pub fn generate_split(cfg: &DataConfig, split: Split) -> Result<Vec<DatasetRecord>> {
    cfg.validate()?;
    let bank = cfg.feature_bank();
    (0..cfg.size(split) as u64)
        .into_par_iter()
        .map(|id| generate_record(cfg, &bank, split, id))
        .collect()
}

pub fn measure_quality(records: &[DatasetRecord]) -> Result<ProposalQuality> {
    let samples = records.iter().map(|r| r.to_eval_sample()).collect::<Result<Vec<_>>>()?;
    Ok(proposal_quality(&samples, DEFAULT_IOU_THRESHOLD)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub path: PathBuf,
    pub records: usize,
    pub quality: Option<ProposalQuality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub fingerprint: String,
    pub vocab_size: usize,
    pub splits: Vec<SplitSummary>,
}

/// Writes `train.jsonl`, `val.jsonl`, `test.jsonl` and `vocab.txt` into
/// `dir`. The vocabulary comes from the training queries only.
pub fn generate_dataset(cfg: &DataConfig, dir: &Path, overwrite: bool) -> Result<GenerateSummary> {
    cfg.validate()?;
    let targets: Vec<PathBuf> = Split::ALL
        .iter()
        .map(|s| dir.join(s.file_name()))
        .chain([dir.join(VOCAB_FILE)])
        .collect();
    if !overwrite {
        if let Some(existing) = targets.iter().find(|p| p.exists()) {
            return Err(Error::Config(format!(
                "{} already exists (pass --overwrite to replace it)",
                existing.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut splits = Vec::new();
    let mut vocab: Option<Vocabulary> = None;
    for split in Split::ALL {
        let records = generate_split(cfg, split)?;
        if split == Split::Train {
            let queries: Vec<Vec<String>> = records.iter().map(|r| r.query.clone()).collect();
            vocab = Some(build_vocab(&queries, 1)?);
        }
        let path = dir.join(split.file_name());
        write_dataset(&path, &cfg.header(split), &records)?;
        let quality = if records.is_empty() { None } else { Some(measure_quality(&records)?) };
        splits.push(SplitSummary {
            split,
            path,
            records: records.len(),
            quality,
        });
    }
    let vocab = vocab.expect("train split generated first");
    let vocab_path = dir.join(VOCAB_FILE);
    vocab.write(&vocab_path)?;
    Ok(GenerateSummary {
        fingerprint: cfg.fingerprint(),
        vocab_size: vocab.len(),
        splits,
    })
}

pub fn load_vocab(dir: &Path) -> Result<Vocabulary> {
    Ok(Vocabulary::read(&dir.join(VOCAB_FILE))?)
}

pub fn split_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(split.file_name())
}
