//! Proposal-quality scores and grounding accuracy.
//!
//! A proposal covers a ground truth when their IoU is strictly above the
//! threshold (0.5 by default). Over `M` samples:
//!
//! * discrimination = fraction of samples with at least one covering proposal;
//! * diversity = `1 / mean(#covering proposals per sample)`, undefined when
//!   nothing is covered anywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou, BBox, ImageSize};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no samples to score")]
    Empty,
    #[error("{predictions} predictions for {ground_truths} ground truths")]
    LengthMismatch {
        predictions: usize,
        ground_truths: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub proposals: Vec<BBox>,
    pub gt: BBox,
    pub image: ImageSize,
}

pub fn covers(proposal: &BBox, gt: &BBox, threshold: f64) -> bool {
    iou(proposal, gt) > threshold
}

fn covered_count(sample: &EvalSample, threshold: f64) -> usize {
    sample
        .proposals
        .iter()
        .filter(|p| covers(p, &sample.gt, threshold))
        .count()
}

pub fn discrimination_score(samples: &[EvalSample], threshold: f64) -> Result<f64, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    let hit = samples
        .iter()
        .filter(|s| covered_count(s, threshold) > 0)
        .count();
    Ok(hit as f64 / samples.len() as f64)
}

/// Diversity score, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub value: Option<f64>,
    pub reason: Option<String>,
}

pub fn diversity_score(samples: &[EvalSample], threshold: f64) -> Result<DiversityScore, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    let covered: usize = samples.iter().map(|s| covered_count(s, threshold)).sum();
    Ok(diversity_from_counts(covered, samples.len()))
}

fn diversity_from_counts(covered: usize, samples: usize) -> DiversityScore {
    if covered == 0 {
        DiversityScore {
            value: None,
            reason: Some("no proposal covers any ground truth".to_string()),
        }
    } else {
        DiversityScore {
            value: Some(1.0 / (covered as f64 / samples as f64)),
            reason: None,
        }
    }
}

pub fn grounding_accuracy(predictions: &[BBox], gts: &[BBox], threshold: f64) -> Result<f64, MetricError> {
    if predictions.len() != gts.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            ground_truths: gts.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = predictions
        .iter()
        .zip(gts)
        .filter(|(p, g)| covers(p, g, threshold))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Proposal-set statistics of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalQuality {
    pub samples: usize,
    pub proposals_per_sample: usize,
    pub s_dis: f64,
    pub s_div: Option<f64>,
    pub s_div_reason: Option<String>,
    pub covered_total: usize,
    /// Samples with no proposal strictly above the threshold.
    pub degenerate_samples: usize,
}

pub fn proposal_quality(samples: &[EvalSample], threshold: f64) -> Result<ProposalQuality, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    let counts: Vec<usize> = samples.iter().map(|s| covered_count(s, threshold)).collect();
    let covered_total = counts.iter().sum();
    let degenerate = counts.iter().filter(|&&c| c == 0).count();
    let div = diversity_from_counts(covered_total, samples.len());
    Ok(ProposalQuality {
        samples: samples.len(),
        proposals_per_sample: samples.iter().map(|s| s.proposals.len()).max().unwrap_or(0),
        s_dis: (samples.len() - degenerate) as f64 / samples.len() as f64,
        s_div: div.value,
        s_div_reason: div.reason,
        covered_total,
        degenerate_samples: degenerate,
    })
}

/// Evaluation summary of a model on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Accuracy of the refined argmax box.
    pub accuracy: f64,
    /// Accuracy of the argmax proposal before refinement.
    pub unrefined_accuracy: f64,
    #[serde(flatten)]
    pub quality: ProposalQuality,
    pub fingerprint: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    fn sample(proposals: Vec<BBox>, gt: BBox) -> EvalSample {
        EvalSample {
            proposals,
            gt,
            image: ImageSize::new(100.0, 100.0).unwrap(),
        }
    }

    #[test]
    fn coverage_boundary_is_strict() {
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        assert!(covers(&gt, &gt, 0.5));
        assert!(!covers(&bx(50.0, 50.0, 60.0, 60.0), &gt, 0.5));
        // Half the ground truth: IoU exactly 0.5.
        let half = bx(0.0, 0.0, 10.0, 5.0);
        assert_eq!(iou(&half, &gt), 0.5);
        assert!(!covers(&half, &gt, 0.5));
    }

    #[test]
    fn reference_scores() {
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        let far = bx(50.0, 50.0, 60.0, 60.0);
        let s1 = sample(vec![gt, far], gt);
        let s2 = sample(vec![far, far], gt);
        assert_eq!(discrimination_score(&[s1.clone(), s2.clone()], 0.5).unwrap(), 0.5);
        assert_eq!(discrimination_score(&[s1.clone(), s1.clone()], 0.5).unwrap(), 1.0);

        let s3 = sample(vec![gt, gt, far], gt);
        let div = diversity_score(&[s1.clone(), s3], 0.5).unwrap();
        assert!((div.value.unwrap() - 1.0 / 1.5).abs() < 1e-15);
        assert_eq!(diversity_score(std::slice::from_ref(&s1), 0.5).unwrap().value, Some(1.0));

        let none = diversity_score(std::slice::from_ref(&s2), 0.5).unwrap();
        assert!(none.value.is_none() && none.reason.is_some());

        assert_eq!(discrimination_score(&[], 0.5), Err(MetricError::Empty));
        assert_eq!(diversity_score(&[], 0.5), Err(MetricError::Empty));
    }

    #[test]
    fn accuracy_reference_values() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(20.0, 20.0, 30.0, 30.0);
        assert_eq!(grounding_accuracy(&[a, b], &[a, b], 0.5).unwrap(), 1.0);
        assert_eq!(grounding_accuracy(&[a, b], &[b, a], 0.5).unwrap(), 0.0);
        assert!(matches!(
            grounding_accuracy(&[a], &[a, b], 0.5),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn quality_summary_counts_degenerate_samples() {
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        let far = bx(50.0, 50.0, 60.0, 60.0);
        let q = proposal_quality(&[sample(vec![gt, gt], gt), sample(vec![far, far], gt)], 0.5).unwrap();
        assert_eq!(q.degenerate_samples, 1);
        assert_eq!(q.covered_total, 2);
        assert_eq!(q.s_dis, 0.5);
        assert_eq!(q.s_div, Some(1.0));
    }
}
