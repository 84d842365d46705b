//! Per-proposal fusion, ranking scores and box refinement offsets.

use serde::{Deserialize, Serialize};

use crate::geometry::{spatial_feature, BBox, ImageSize};
use crate::tensor::{Graph, TensorError, Var};

/// A candidate box with its appearance descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(rename = "feat")]
    pub feature: Vec<f64>,
}

/// L2-normalized appearance followed by the 5-d spatial feature.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFeature(pub Vec<f64>);

impl VisualFeature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn assemble_visual_feature(
    proposal: &Proposal,
    img: ImageSize,
    d_v: usize,
) -> Result<VisualFeature, TensorError> {
    if proposal.feature.len() != d_v {
        return Err(TensorError::ShapeMismatch {
            kernel: "assemble_visual_feature",
            lhs: vec![proposal.feature.len()],
            rhs: vec![d_v],
        });
    }
    let norm = proposal.feature.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out: Vec<f64> = if norm > 0.0 {
        proposal.feature.iter().map(|x| x / norm).collect()
    } else {
        proposal.feature.clone()
    };
    out.extend_from_slice(&spatial_feature(&proposal.bbox, img).0);
    Ok(VisualFeature(out))
}

/// Graph handles for the fusion, score and regression layers.
#[derive(Debug, Clone, Copy)]
pub struct HeadWeights {
    /// `[d_q + d_v + 5, d_o]`
    pub fuse_w: Var,
    pub fuse_b: Var,
    /// `[d_o, 1]`
    pub score_w: Var,
    pub score_b: Var,
    /// `[d_o, 4]`
    pub reg_w: Var,
    pub reg_b: Var,
}

/// `ReLU(W_f^T (q || v) + b_f)`.
pub fn fuse(g: &mut Graph, query: Var, visual: Var, w: &HeadWeights) -> Result<Var, TensorError> {
    let joint = g.concat(&[query, visual])?;
    let z = g.matmul(joint, w.fuse_w)?;
    let z = g.add_bias(z, w.fuse_b)?;
    Ok(g.relu(z))
}

/// Raw scores `W_s^T f_i + b_s` for every proposal and their softmax.
pub fn score_all(g: &mut Graph, fused: &[Var], w: &HeadWeights) -> Result<(Var, Var), TensorError> {
    if fused.is_empty() {
        return Err(TensorError::InvalidShape {
            kernel: "score_all",
            expected: "at least one proposal",
            shape: vec![0],
        });
    }
    let mut raw = Vec::with_capacity(fused.len());
    for &f in fused {
        let s = g.matmul(f, w.score_w)?;
        raw.push(g.add_bias(s, w.score_b)?);
    }
    let raw = g.concat(&raw)?;
    let probs = g.softmax(raw)?;
    Ok((raw, probs))
}

/// Offsets `W_t^T f_i + b_t`, one 4-vector per proposal.
pub fn regress_all(g: &mut Graph, fused: &[Var], w: &HeadWeights) -> Result<Vec<Var>, TensorError> {
    fused
        .iter()
        .map(|&f| {
            let t = g.matmul(f, w.reg_w)?;
            g.add_bias(t, w.reg_b)
        })
        .collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if !(v > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}
