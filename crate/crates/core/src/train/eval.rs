use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::{covers, grounding_accuracy, proposal_quality, EvalSample, MetricReport, DEFAULT_IOU_THRESHOLD};
use crate::model::{GroundingModel, GroundingSample, Prediction};
use crate::synth::{fingerprint_d_v, DatasetHeader, DatasetRecord};

/// Anything that picks and refines a proposal for a sample.
pub trait Predictor: Sync {
    fn predict(&self, sample: &GroundingSample) -> Result<Prediction>;
    fn d_v(&self) -> usize;
    fn fingerprint(&self) -> String;
    fn vocab(&self) -> &crate::query::Vocabulary;
}

impl Predictor for GroundingModel {
    fn predict(&self, sample: &GroundingSample) -> Result<Prediction> {
        GroundingModel::predict(self, sample)
    }

    fn d_v(&self) -> usize {
        self.dims().d_v
    }

    fn fingerprint(&self) -> String {
        GroundingModel::fingerprint(self)
    }

    fn vocab(&self) -> &crate::query::Vocabulary {
        GroundingModel::vocab(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: u64,
    pub chosen: usize,
    pub raw_box: BBox,
    pub refined_box: BBox,
    pub correct: bool,
    pub raw_correct: bool,
}

fn eval_sample(s: &GroundingSample) -> EvalSample {
    EvalSample {
        proposals: s.proposals.iter().map(|p| p.bbox).collect(),
        gt: s.gt,
        image: s.image,
    }
}

/// Metrics and per-sample predictions on already-tokenized samples.
pub fn evaluate_samples<P: Predictor + ?Sized>(
    model: &P,
    samples: &[GroundingSample],
    fingerprint: &str,
) -> Result<(MetricReport, Vec<PredictionRow>)> {
    let predictions = samples
        .par_iter()
        .map(|s| model.predict(s))
        .collect::<Result<Vec<_>>>()?;
    let gts: Vec<BBox> = samples.iter().map(|s| s.gt).collect();
    let refined: Vec<BBox> = predictions.iter().map(|p| p.refined_box).collect();
    let raw: Vec<BBox> = predictions.iter().map(|p| p.raw_box).collect();
    let evals: Vec<EvalSample> = samples.iter().map(eval_sample).collect();

    let report = MetricReport {
        accuracy: grounding_accuracy(&refined, &gts, DEFAULT_IOU_THRESHOLD)?,
        unrefined_accuracy: grounding_accuracy(&raw, &gts, DEFAULT_IOU_THRESHOLD)?,
        quality: proposal_quality(&evals, DEFAULT_IOU_THRESHOLD)?,
        fingerprint: fingerprint.to_string(),
    };
    let rows = samples
        .iter()
        .zip(&predictions)
        .map(|(s, p)| PredictionRow {
            id: s.id,
            chosen: p.index,
            raw_box: p.raw_box,
            refined_box: p.refined_box,
            correct: covers(&p.refined_box, &s.gt, DEFAULT_IOU_THRESHOLD),
            raw_correct: covers(&p.raw_box, &s.gt, DEFAULT_IOU_THRESHOLD),
        })
        .collect();
    Ok((report, rows))
}

/// Evaluates a model on a dataset file's contents after checking that the
/// data was generated with the feature size the model expects.
pub fn evaluate<P: Predictor + ?Sized>(
    model: &P,
    header: &DatasetHeader,
    records: &[DatasetRecord],
) -> Result<(MetricReport, Vec<PredictionRow>)> {
    if fingerprint_d_v(&header.fingerprint) != Some(model.d_v()) {
        return Err(Error::Fingerprint {
            checkpoint: model.fingerprint(),
            expected: header.fingerprint.clone(),
        });
    }
    let samples = records
        .iter()
        .map(|r| r.to_sample(model.vocab()))
        .collect::<Result<Vec<_>>>()?;
    let fingerprint = format!("model[{}] data[{}]", model.fingerprint(), header.fingerprint);
    evaluate_samples(model, &samples, &fingerprint)
}
