//! The full grounding network: query encoder plus grounding head.

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{decode_regression, BBox, ImageSize, RegressionTarget};
use crate::head::{argmax, assemble_visual_feature, fuse, regress_all, score_all, HeadWeights, Proposal};
use crate::losses::SampleOutputs;
use crate::query::{encode_query, LstmWeights, TokenSequence, Vocabulary};
use crate::tensor::{bias, xavier_uniform, Graph, ParamStore, Tensor, Var};

/// Layer sizes. `refine` records whether the regression head was trained
/// and is applied at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_v: usize,
    pub d_e: usize,
    pub d_q: usize,
    pub d_o: usize,
    pub vocab_size: usize,
    pub refine: bool,
}

impl ModelDims {
    pub fn fingerprint(&self) -> String {
        format!(
            "d_v={};d_e={};d_q={};d_o={};vocab={};refine={}",
            self.d_v, self.d_e, self.d_q, self.d_o, self.vocab_size, self.refine
        )
    }

    fn validate(&self) -> Result<()> {
        if [self.d_v, self.d_e, self.d_q, self.d_o, self.vocab_size].contains(&0) {
            return Err(Error::Config(format!("all model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// One query-image unit: proposals, tokenized query, single ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingSample {
    pub id: u64,
    pub image: ImageSize,
    pub tokens: TokenSequence,
    pub proposals: Vec<Proposal>,
    pub gt: BBox,
}

const EMBED: usize = 0;
const LSTM_W: usize = 1;
const LSTM_B: usize = 5;
const FUSE_W: usize = 9;
const FUSE_B: usize = 10;
const SCORE_W: usize = 11;
const SCORE_B: usize = 12;
const REG_W: usize = 13;
const REG_B: usize = 14;

pub(crate) const PARAM_NAMES: [&str; 15] = [
    "embed",
    "lstm.w_input",
    "lstm.w_forget",
    "lstm.w_output",
    "lstm.w_cell",
    "lstm.b_input",
    "lstm.b_forget",
    "lstm.b_output",
    "lstm.b_cell",
    "fuse.w",
    "fuse.b",
    "score.w",
    "score.b",
    "reg.w",
    "reg.b",
];

/// Graph handles of every parameter after [`GroundingModel::bind`].
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub all: Vec<Var>,
    pub embedding: Var,
    pub lstm: LstmWeights,
    pub head: HeadWeights,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub bound: BoundModel,
    pub query: Var,
    pub raw_scores: Var,
    pub outputs: SampleOutputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub raw_box: BBox,
    pub refined_box: BBox,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingModel {
    dims: ModelDims,
    vocab: Vocabulary,
    params: ParamStore,
}

impl GroundingModel {
    /// Xavier-uniform weights, zero biases, forget-gate bias 1.
    pub fn new<R: Rng + ?Sized>(dims: ModelDims, vocab: Vocabulary, rng: &mut R) -> Result<Self> {
        Self::build(dims, vocab, |shape| Ok(xavier_uniform(shape, rng)?))
    }

    /// All weights and biases zero (forget bias included).
    pub fn zeroed(dims: ModelDims, vocab: Vocabulary) -> Result<Self> {
        let mut model = Self::build(dims, vocab, |shape| Ok(Tensor::zeros(shape)?.tracked()))?;
        model.params.tensors_mut()[LSTM_B + 1].values_mut().fill(0.0);
        Ok(model)
    }

    fn build(
        dims: ModelDims,
        vocab: Vocabulary,
        mut weight: impl FnMut(&[usize]) -> Result<Tensor>,
    ) -> Result<Self> {
        dims.validate()?;
        if vocab.len() != dims.vocab_size {
            return Err(Error::Dimension(format!(
                "vocabulary has {} entries, dims say {}",
                vocab.len(),
                dims.vocab_size
            )));
        }
        let ModelDims { d_v, d_e, d_q, d_o, .. } = dims;
        let mut params = ParamStore::new();
        params.insert(PARAM_NAMES[EMBED], weight(&[dims.vocab_size, d_e])?);
        for name in &PARAM_NAMES[LSTM_W..LSTM_B] {
            params.insert(*name, weight(&[d_e + d_q, d_q])?);
        }
        for (k, name) in PARAM_NAMES[LSTM_B..FUSE_W].iter().enumerate() {
            let fill = if k == 1 { 1.0 } else { 0.0 };
            params.insert(*name, bias(d_q, fill)?);
        }
        params.insert(PARAM_NAMES[FUSE_W], weight(&[d_q + d_v + 5, d_o])?);
        params.insert(PARAM_NAMES[FUSE_B], bias(d_o, 0.0)?);
        params.insert(PARAM_NAMES[SCORE_W], weight(&[d_o, 1])?);
        params.insert(PARAM_NAMES[SCORE_B], bias(1, 0.0)?);
        params.insert(PARAM_NAMES[REG_W], weight(&[d_o, 4])?);
        params.insert(PARAM_NAMES[REG_B], bias(4, 0.0)?);
        Ok(Self { dims, vocab, params })
    }

    pub(crate) fn from_parts(dims: ModelDims, vocab: Vocabulary, params: ParamStore) -> Result<Self> {
        let reference = Self::zeroed(dims, vocab.clone())?;
        if params.names() != reference.params.names() {
            return Err(Error::Dimension(format!(
                "parameter names {:?} do not match the model layout",
                params.names()
            )));
        }
        for ((name, got), (_, want)) in params.iter().zip(reference.params.iter()) {
            if got.shape() != want.shape() {
                return Err(Error::Dimension(format!(
                    "{name}: shape {:?}, expected {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        Ok(Self { dims, vocab, params })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn fingerprint(&self) -> String {
        self.dims.fingerprint()
    }

    pub fn set_refine(&mut self, refine: bool) {
        self.dims.refine = refine;
    }

    pub fn bind(&self, g: &mut Graph) -> BoundModel {
        let all = self.params.bind(g);
        BoundModel {
            embedding: all[EMBED],
            lstm: LstmWeights {
                w_input: all[LSTM_W],
                w_forget: all[LSTM_W + 1],
                w_output: all[LSTM_W + 2],
                w_cell: all[LSTM_W + 3],
                b_input: all[LSTM_B],
                b_forget: all[LSTM_B + 1],
                b_output: all[LSTM_B + 2],
                b_cell: all[LSTM_B + 3],
            },
            head: HeadWeights {
                fuse_w: all[FUSE_W],
                fuse_b: all[FUSE_B],
                score_w: all[SCORE_W],
                score_b: all[SCORE_B],
                reg_w: all[REG_W],
                reg_b: all[REG_B],
            },
            all,
        }
    }

    /// Checks a sample against the model sizes before any graph is built.
    pub fn check_sample(&self, sample: &GroundingSample) -> Result<()> {
        if sample.proposals.is_empty() {
            return Err(Error::Dimension(format!("sample {} has no proposals", sample.id)));
        }
        if let Some(p) = sample.proposals.iter().find(|p| p.feature.len() != self.dims.d_v) {
            return Err(Error::Dimension(format!(
                "sample {}: proposal feature length {} but model expects d_v = {}",
                sample.id,
                p.feature.len(),
                self.dims.d_v
            )));
        }
        if let Some(&t) = sample.tokens.0.iter().find(|&&t| t >= self.dims.vocab_size) {
            return Err(Error::Dimension(format!(
                "sample {}: token index {t} outside vocabulary of {}",
                sample.id, self.dims.vocab_size
            )));
        }
        Ok(())
    }

    /// Builds the full forward computation for one sample into `g`.
    /// Regression offsets are only computed when `with_offsets` is set.
    pub fn forward(&self, g: &mut Graph, sample: &GroundingSample, with_offsets: bool) -> Result<ForwardPass> {
        self.check_sample(sample)?;
        let bound = self.bind(g);
        let query = encode_query(g, bound.embedding, &bound.lstm, &sample.tokens)?;
        let mut fused = Vec::with_capacity(sample.proposals.len());
        for p in &sample.proposals {
            let v = assemble_visual_feature(p, sample.image, self.dims.d_v)?;
            let v = g.constant_vector(v.0)?;
            fused.push(fuse(g, query, v, &bound.head)?);
        }
        let (raw_scores, scores) = score_all(g, &fused, &bound.head)?;
        let offsets = if with_offsets {
            regress_all(g, &fused, &bound.head)?
        } else {
            Vec::new()
        };
        Ok(ForwardPass {
            bound,
            query,
            raw_scores,
            outputs: SampleOutputs { scores, offsets },
        })
    }

    /// Highest-scoring proposal (lowest index on ties), refined by its own
    /// regression offsets when the model was trained with refinement.
    pub fn predict(&self, sample: &GroundingSample) -> Result<Prediction> {
        let mut g = Graph::new();
        let pass = self.forward(&mut g, sample, self.dims.refine)?;
        let scores = g.value(pass.outputs.scores).to_vec();
        let index = argmax(g.value(pass.raw_scores)).expect("at least one proposal");
        let raw_box = sample.proposals[index].bbox;
        let refined_box = if self.dims.refine {
            let t = g.value(pass.outputs.offsets[index]);
            let t = RegressionTarget::from_array([t[0], t[1], t[2], t[3]]);
            decode_regression(&raw_box, &t, sample.image)?
        } else {
            raw_box
        };
        Ok(Prediction {
            index,
            raw_box,
            refined_box,
            scores,
        })
    }
}
