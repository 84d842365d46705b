//! Ranking and refinement objectives.
//!
//! The ranking target is a soft label: proposal IoUs above `eta` are kept,
//! everything else is zeroed, and the vector is L1-normalized. The ranking
//! loss is `(1/N) * sum_i s*_i log(s*_i / s_i)` over the softmax scores,
//! kept with the `1/N` factor so loss magnitudes depend on the proposal
//! count. Samples with no proposal above `eta` have no soft label and
//! contribute no ranking term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RegressionTarget;
use crate::head::argmax;
use crate::tensor::{Graph, TensorError, Var};

/// Added to probabilities before every log.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("IoU {value} at position {index} is outside [0, 1]")]
    IouOutOfRange { index: usize, value: f64 },
    #[error("soft label is degenerate: no proposal exceeds the IoU threshold")]
    DegenerateLabel,
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid loss configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RankingLoss {
    #[default]
    Kld,
    SoftmaxSingleLabel,
}

impl RankingLoss {
    pub fn name(self) -> &'static str {
        match self {
            RankingLoss::Kld => "kld",
            RankingLoss::SoftmaxSingleLabel => "softmax_single_label",
        }
    }
}

impl std::str::FromStr for RankingLoss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kld" => Ok(RankingLoss::Kld),
            "softmax_single_label" | "softmax" => Ok(RankingLoss::SoftmaxSingleLabel),
            other => Err(format!("unknown ranking variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// IoU threshold for soft labels (strictly greater passes).
    pub eta: f64,
    /// Weight of the regression term.
    pub gamma: f64,
    pub ranking: RankingLoss,
    pub regression: bool,
    /// Restrict the regression term to proposals with IoU above `eta`.
    /// Off by default: the plain objective regresses every proposal.
    pub reg_mask_by_iou: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            gamma: 1.0,
            ranking: RankingLoss::Kld,
            regression: true,
            reg_mask_by_iou: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(LossError::InvalidConfig(format!("eta {} not in (0, 1)", self.eta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(LossError::InvalidConfig(format!("gamma {} must be >= 0", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelDistribution {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

pub fn soft_labels(ious: &[f64], eta: f64) -> Result<SoftLabelDistribution, LossError> {
    if let Some((index, &value)) = ious
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
    {
        return Err(LossError::IouOutOfRange { index, value });
    }
    let kept: Vec<f64> = ious.iter().map(|&v| if v > eta { v } else { 0.0 }).collect();
    let total: f64 = kept.iter().sum();
    if total <= 0.0 {
        return Ok(SoftLabelDistribution {
            values: vec![0.0; ious.len()],
            degenerate: true,
        });
    }
    Ok(SoftLabelDistribution {
        values: kept.into_iter().map(|v| v / total).collect(),
        degenerate: false,
    })
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), LossError> {
    if expected != got {
        return Err(LossError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

/// KL ranking loss between a soft label and softmax scores.
pub fn kld_loss(g: &mut Graph, target: &SoftLabelDistribution, scores: Var) -> Result<Var, LossError> {
    if target.degenerate {
        return Err(LossError::DegenerateLabel);
    }
    let n = target.values.len();
    check_len("kld_loss scores", n, g.value(scores).len())?;
    let entropy_term: f64 = target
        .values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum();
    let floored = g.add_scalar(scores, LOG_FLOOR);
    let logs = g.log(floored)?;
    let weights = g.constant_vector(target.values.clone())?;
    let weighted = g.mul(weights, logs)?;
    let cross = g.sum(weighted);
    let neg = g.scale(cross, -1.0 / n as f64);
    Ok(g.add_scalar(neg, entropy_term / n as f64))
}

/// Cross-entropy against a one-hot label on the highest-IoU proposal.
pub fn softmax_single_label_loss(g: &mut Graph, scores: Var, ious: &[f64]) -> Result<Var, LossError> {
    check_len("softmax_single_label_loss scores", ious.len(), g.value(scores).len())?;
    let k = argmax(ious).ok_or(LossError::LengthMismatch {
        what: "softmax_single_label_loss ious",
        expected: 1,
        got: 0,
    })?;
    let mut mask = vec![0.0; ious.len()];
    mask[k] = 1.0;
    let mask = g.constant_vector(mask)?;
    let picked = g.mul(mask, scores)?;
    let picked = g.sum(picked);
    let floored = g.add_scalar(picked, LOG_FLOOR);
    let log = g.log(floored)?;
    Ok(g.scale(log, -1.0))
}

/// `(1/N) sum_i sum_c smoothL1(t_ic - t*_ic)`.
pub fn smooth_l1_reg_loss(
    g: &mut Graph,
    predicted: &[Var],
    targets: &[RegressionTarget],
) -> Result<Var, LossError> {
    check_len("smooth_l1_reg_loss targets", predicted.len(), targets.len())?;
    if predicted.is_empty() {
        return Err(LossError::LengthMismatch {
            what: "smooth_l1_reg_loss predictions",
            expected: 1,
            got: 0,
        });
    }
    let n = predicted.len();
    let pred = g.concat(predicted)?;
    let flat: Vec<f64> = targets.iter().flat_map(|t| t.to_array()).collect();
    check_len("smooth_l1_reg_loss coordinates", flat.len(), g.value(pred).len())?;
    let target = g.constant_vector(flat)?;
    let diff = g.sub(pred, target)?;
    let rho = g.smooth_l1(diff);
    let total = g.sum(rho);
    Ok(g.scale(total, 1.0 / n as f64))
}

/// Differentiable outputs of one forward pass that the objective needs.
#[derive(Debug, Clone)]
pub struct SampleOutputs {
    pub scores: Var,
    pub offsets: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: Var,
    pub rank: f64,
    /// `None` when regression is disabled.
    pub reg: Option<f64>,
    /// No proposal above `eta`; under the KL variant the ranking term was skipped.
    pub degenerate: bool,
}

/// `L_rank + gamma * L_reg` for one sample.
pub fn total_loss(
    g: &mut Graph,
    outputs: &SampleOutputs,
    ious: &[f64],
    reg_targets: &[RegressionTarget],
    config: &LossConfig,
) -> Result<LossTerms, LossError> {
    let labels = soft_labels(ious, config.eta)?;
    let degenerate = labels.degenerate;

    let rank_var = match config.ranking {
        RankingLoss::Kld if degenerate => None,
        RankingLoss::Kld => Some(kld_loss(g, &labels, outputs.scores)?),
        RankingLoss::SoftmaxSingleLabel => Some(softmax_single_label_loss(g, outputs.scores, ious)?),
    };

    let reg_var = if config.regression {
        check_len("total_loss offsets", ious.len(), outputs.offsets.len())?;
        check_len("total_loss regression targets", outputs.offsets.len(), reg_targets.len())?;
        let (preds, targets): (Vec<Var>, Vec<RegressionTarget>) = if config.reg_mask_by_iou {
            outputs
                .offsets
                .iter()
                .zip(reg_targets)
                .zip(ious)
                .filter(|(_, &iou)| iou > config.eta)
                .map(|((&v, &t), _)| (v, t))
                .unzip()
        } else {
            (outputs.offsets.clone(), reg_targets.to_vec())
        };
        if preds.is_empty() {
            None
        } else {
            Some(smooth_l1_reg_loss(g, &preds, &targets)?)
        }
    } else {
        None
    };

    let rank = rank_var.map(|v| g.scalar(v)).unwrap_or(0.0);
    let reg = if config.regression {
        Some(reg_var.map(|v| g.scalar(v)).unwrap_or(0.0))
    } else {
        None
    };
    let weighted_reg = reg_var.map(|v| g.scale(v, config.gamma));
    let total = match (rank_var, weighted_reg) {
        (Some(r), Some(t)) => g.add(r, t)?,
        (Some(r), None) => r,
        (None, Some(t)) => t,
        (None, None) => g.constant(&[], vec![0.0])?,
    };
    Ok(LossTerms {
        total,
        rank,
        reg,
        degenerate,
    })
}
