//! Mini-batch Adam training, validation-based model selection, evaluation.

mod eval;
mod log;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use eval::{evaluate, evaluate_samples, PredictionRow, Predictor};
pub use log::{read_log, write_log, TrainLogEntry, LOG_HEADER};

use crate::error::{Error, Result};
use crate::geometry::{encode_regression, iou, RegressionTarget};
use crate::losses::{total_loss, LossConfig, RankingLoss};
use crate::metrics::{grounding_accuracy, DEFAULT_IOU_THRESHOLD};
use crate::model::{GroundingModel, GroundingSample, ModelDims};
use crate::query::Vocabulary;
use crate::synth::DatasetRecord;
use crate::tensor::{Adam, AdamConfig, Graph};

/// Learned layer widths; `d_v` and the vocabulary come from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_e: usize,
    pub d_q: usize,
    pub d_o: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_e: 32,
            d_q: 64,
            d_o: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub iterations: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning-rate multiplier applied once `decay_at` of the run is done.
    pub decay: f64,
    pub decay_at: f64,
    pub eta: f64,
    pub gamma: f64,
    pub variant: RankingLoss,
    pub regression: bool,
    pub reg_mask_by_iou: bool,
    /// Validation period in iterations; the last iteration is always validated.
    pub val_every: u64,
    pub weight_decay: f64,
    pub clip_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            iterations: 2000,
            batch_size: 32,
            learning_rate: 1e-3,
            decay: 0.1,
            decay_at: 0.7,
            eta: 0.5,
            gamma: 1.0,
            variant: RankingLoss::Kld,
            regression: true,
            reg_mask_by_iou: false,
            val_every: 200,
            weight_decay: 0.0,
            clip_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            eta: self.eta,
            gamma: self.gamma,
            ranking: self.variant,
            regression: self.regression,
            reg_mask_by_iou: self.reg_mask_by_iou,
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        let decay_every = if self.decay_at > 0.0 && self.decay_at < 1.0 && self.iterations > 0 {
            Some(((self.decay_at * self.iterations as f64).round() as u64).max(1))
        } else {
            None
        };
        AdamConfig {
            learning_rate: self.learning_rate,
            decay: self.decay,
            decay_every,
            weight_decay: self.weight_decay,
            clip_grad_norm: self.clip_grad_norm,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("train.learning_rate {} must be positive", self.learning_rate)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("train.decay {} not in (0, 1]", self.decay)));
        }
        if !(0.0..=1.0).contains(&self.decay_at) {
            return Err(Error::Config(format!("train.decay_at {} not in [0, 1]", self.decay_at)));
        }
        if self.val_every == 0 {
            return Err(Error::Config("train.val_every must be positive".into()));
        }
        self.loss_config().validate()?;
        Ok(())
    }
}

/// A training sample with its per-proposal IoUs and regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub sample: GroundingSample,
    pub ious: Vec<f64>,
    pub targets: Vec<RegressionTarget>,
}

impl PreparedSample {
    pub fn new(sample: GroundingSample) -> Result<Self> {
        let ious = sample.proposals.iter().map(|p| iou(&p.bbox, &sample.gt)).collect();
        let targets = sample
            .proposals
            .iter()
            .map(|p| encode_regression(&p.bbox, &sample.gt))
            .collect::<Result<_, _>>()?;
        Ok(Self { sample, ious, targets })
    }

    pub fn is_degenerate(&self, eta: f64) -> bool {
        self.ious.iter().all(|&v| v <= eta)
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub vocab: Vocabulary,
    pub d_v: usize,
    pub train: Vec<PreparedSample>,
    pub val: Vec<GroundingSample>,
}

impl TrainingSet {
    pub fn new(vocab: Vocabulary, d_v: usize, train: Vec<GroundingSample>, val: Vec<GroundingSample>) -> Result<Self> {
        let train = train.into_iter().map(PreparedSample::new).collect::<Result<_>>()?;
        Ok(Self { vocab, d_v, train, val })
    }

    pub fn from_records(vocab: Vocabulary, d_v: usize, train: &[DatasetRecord], val: &[DatasetRecord]) -> Result<Self> {
        let train = samples_from_records(train, &vocab)?;
        let val = samples_from_records(val, &vocab)?;
        Self::new(vocab, d_v, train, val)
    }
}

pub fn samples_from_records(records: &[DatasetRecord], vocab: &Vocabulary) -> Result<Vec<GroundingSample>> {
    records.iter().map(|r| r.to_sample(vocab)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial: GroundingModel,
    pub best: GroundingModel,
    pub last: GroundingModel,
    pub best_iteration: u64,
    pub best_val_accuracy: Option<f64>,
    pub log: Vec<TrainLogEntry>,
}

/// Loss and gradients of one sample, computed against frozen parameters.
struct SampleStep {
    grads: Vec<Option<Vec<f64>>>,
    total: f64,
    rank: f64,
    reg: Option<f64>,
    degenerate: bool,
}

fn sample_step(model: &GroundingModel, prepared: &PreparedSample, loss: &LossConfig) -> Result<SampleStep> {
    let mut g = Graph::new();
    let pass = model.forward(&mut g, &prepared.sample, loss.regression)?;
    let terms = total_loss(&mut g, &pass.outputs, &prepared.ious, &prepared.targets, loss)?;
    let grads = g.backward(terms.total)?;
    Ok(SampleStep {
        grads: pass.bound.all.iter().map(|&v| grads.get(v).map(<[f64]>::to_vec)).collect(),
        total: g.scalar(terms.total),
        rank: terms.rank,
        reg: terms.reg,
        degenerate: terms.degenerate,
    })
}

/// Epoch-by-epoch shuffled index batches. A batch never spans two epochs.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    seed: u64,
    len: usize,
    batch: usize,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSchedule {
    pub fn new(seed: u64, len: usize, batch: usize) -> Self {
        let mut s = Self {
            seed,
            len,
            batch,
            epoch: 0,
            order: Vec::new(),
            cursor: 0,
        };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1 + self.epoch);
        self.order = (0..self.len).collect();
        self.order.shuffle(&mut rng);
        self.cursor = 0;
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Next batch and the epoch it belongs to.
    pub fn next_batch(&mut self) -> (u64, Vec<usize>) {
        if self.cursor >= self.len {
            self.epoch += 1;
            self.shuffle();
        }
        let end = (self.cursor + self.batch).min(self.len);
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        (self.epoch, batch)
    }
}

pub fn model_dims(model: &ModelConfig, data: &TrainingSet, regression: bool) -> ModelDims {
    ModelDims {
        d_v: data.d_v,
        d_e: model.d_e,
        d_q: model.d_q,
        d_o: model.d_o,
        vocab_size: data.vocab.len(),
        refine: regression,
    }
}

/// Fraction of samples whose (refined) prediction covers the ground truth.
pub fn accuracy(model: &GroundingModel, samples: &[GroundingSample]) -> Result<f64> {
    let predictions = samples
        .par_iter()
        .map(|s| model.predict(s).map(|p| p.refined_box))
        .collect::<Result<Vec<_>>>()?;
    let gts: Vec<_> = samples.iter().map(|s| s.gt).collect();
    Ok(grounding_accuracy(&predictions, &gts, DEFAULT_IOU_THRESHOLD)?)
}

pub fn train(cfg: &TrainConfig, model_cfg: &ModelConfig, data: &TrainingSet) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() && cfg.iterations > 0 {
        return Err(Error::Config("training split is empty".into()));
    }
    let dims = model_dims(model_cfg, data, cfg.regression);
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GroundingModel::new(dims, data.vocab.clone(), &mut init_rng)?;
    // Every sample is checked before the first update.
    for p in &data.train {
        model.check_sample(&p.sample)?;
    }
    for s in &data.val {
        model.check_sample(s)?;
    }
    let initial = model.clone();

    let loss_cfg = cfg.loss_config();
    let mut adam = Adam::new(cfg.adam_config(), model.params().tensors());
    let mut schedule = BatchSchedule::new(cfg.seed, data.train.len(), cfg.batch_size);
    let mut log = Vec::with_capacity(cfg.iterations as usize);
    let mut best: Option<(f64, u64, GroundingModel)> = None;

    for iteration in 1..=cfg.iterations {
        let (epoch, batch) = schedule.next_batch();
        let lr = adam.learning_rate();
        let steps = batch
            .par_iter()
            .map(|&i| sample_step(&model, &data.train[i], &loss_cfg))
            .collect::<Result<Vec<_>>>()?;

        let n = steps.len() as f64;
        let mut entry = TrainLogEntry {
            iteration,
            epoch,
            variant: cfg.variant,
            total_loss: 0.0,
            rank_loss: 0.0,
            reg_loss: cfg.regression.then_some(0.0),
            degenerate: 0,
            learning_rate: lr,
            val_accuracy: None,
        };
        let params = model.params_mut();
        for step in &steps {
            entry.total_loss += step.total / n;
            entry.rank_loss += step.rank / n;
            if let (Some(acc), Some(r)) = (entry.reg_loss.as_mut(), step.reg) {
                *acc += r / n;
            }
            entry.degenerate += step.degenerate as usize;
            for (tensor, grad) in params.tensors_mut().iter_mut().zip(&step.grads) {
                match grad {
                    Some(g) => tensor.accumulate_grad(g)?,
                    None => tensor.accumulate_grad(&vec![0.0; tensor.len()])?,
                }
            }
        }
        if !entry.total_loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        params.scale_grads(1.0 / n);
        adam.step(params.tensors_mut())?;

        if !data.val.is_empty() && (iteration % cfg.val_every == 0 || iteration == cfg.iterations) {
            let acc = accuracy(&model, &data.val)?;
            entry.val_accuracy = Some(acc);
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, iteration, model.clone()));
            }
        }
        log.push(entry);
    }

    let (best_val_accuracy, best_iteration, best) = match best {
        Some((acc, it, m)) => (Some(acc), it, m),
        None => (None, cfg.iterations, model.clone()),
    };
    Ok(TrainOutcome {
        initial,
        best,
        last: model,
        best_iteration,
        best_val_accuracy,
        log,
    })
}
