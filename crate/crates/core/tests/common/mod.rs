//! Shared checks used by the per-area integration tests and the acceptance
//! harness. Every oracle here is written from the formulas, not from the
//! library code.

#![allow(dead_code)]

use grounding::geometry::{decode_unclipped, encode_regression, iou, BBox, ImageSize, RegressionTarget};
use grounding::gradcheck::{check_gradients, GradCheckReport, DEFAULT_STEP, DEFAULT_TOLERANCE};
use grounding::head::{fuse, regress_all, score_all, HeadWeights};
use grounding::losses::{
    kld_loss, smooth_l1_reg_loss, soft_labels, softmax_single_label_loss, total_loss, LossConfig, RankingLoss,
    SampleOutputs,
};
use grounding::metrics::{discrimination_score, diversity_score, grounding_accuracy, EvalSample};
use grounding::query::{encode_query, lstm_step, LstmWeights, TokenSequence};
use grounding::tensor::{Graph, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one suite: a one-line summary plus every failure found.
#[derive(Debug, Default)]
pub struct SuiteOutcome {
    pub summary: String,
    pub failures: Vec<String>,
}

impl SuiteOutcome {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn assert_ok(&self) {
        assert!(self.ok(), "{}\n{}", self.summary, self.failures.join("\n"));
    }
}

// ---------------------------------------------------------------------------
// gradients

type Loss = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>>;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
    Tensor::new(shape, values).unwrap().tracked()
}

fn coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random linear read-out so every output element gets a distinct weight.
fn readout(g: &mut Graph, x: Var, w: &[f64]) -> Result<Var, TensorError> {
    let c = g.constant(&g.shape(x).to_vec(), w.to_vec())?;
    let p = g.mul(x, c)?;
    Ok(g.sum(p))
}

fn loss_err(e: grounding::losses::LossError) -> TensorError {
    match e {
        grounding::losses::LossError::Tensor(t) => t,
        other => panic!("unexpected loss error in gradient case: {other}"),
    }
}

fn unary(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, op: fn(&mut Graph, Var) -> Result<Var, TensorError>) -> (Vec<Tensor>, Loss) {
    let x = Tensor::new(&[n], (0..n).map(|_| rng.random_range(lo..hi)).collect())
        .unwrap()
        .tracked();
    let w = coeffs(rng, n);
    (
        vec![x],
        Box::new(move |g, v| {
            let y = op(g, v[0])?;
            let w = if g.value(y).len() == w.len() { w.clone() } else { vec![w[0]] };
            readout(g, y, &w)
        }),
    )
}

fn binary(rng: &mut ChaCha8Rng, op: fn(&mut Graph, Var, Var) -> Result<Var, TensorError>) -> (Vec<Tensor>, Loss) {
    let n = rng.random_range(1..7);
    let a = randn(rng, &[n], 2.0);
    let b = randn(rng, &[n], 2.0);
    let w = coeffs(rng, n);
    (
        vec![a, b],
        Box::new(move |g, v| {
            let y = op(g, v[0], v[1])?;
            readout(g, y, &w)
        }),
    )
}

fn lstm_inputs(rng: &mut ChaCha8Rng, d_in: usize, d_h: usize) -> Vec<Tensor> {
    let mut t = Vec::new();
    for _ in 0..4 {
        t.push(randn(rng, &[d_in + d_h, d_h], 0.8));
    }
    for _ in 0..4 {
        t.push(randn(rng, &[d_h], 0.5));
    }
    t
}

fn lstm_weights(v: &[Var]) -> LstmWeights {
    LstmWeights {
        w_input: v[0],
        w_forget: v[1],
        w_output: v[2],
        w_cell: v[3],
        b_input: v[4],
        b_forget: v[5],
        b_output: v[6],
        b_cell: v[7],
    }
}

fn head_inputs(rng: &mut ChaCha8Rng, d_in: usize, d_o: usize) -> Vec<Tensor> {
    vec![
        randn(rng, &[d_in, d_o], 0.8),
        randn(rng, &[d_o], 0.5),
        randn(rng, &[d_o, 1], 0.8),
        randn(rng, &[1], 0.5),
        randn(rng, &[d_o, 4], 0.8),
        randn(rng, &[4], 0.5),
    ]
}

fn head_weights(v: &[Var]) -> HeadWeights {
    HeadWeights {
        fuse_w: v[0],
        fuse_b: v[1],
        score_w: v[2],
        score_b: v[3],
        reg_w: v[4],
        reg_b: v[5],
    }
}

fn random_ious(rng: &mut ChaCha8Rng, n: usize, want_positive: bool) -> Vec<f64> {
    let mut ious: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    if want_positive && !ious.iter().any(|&v| v > 0.5) {
        let k = rng.random_range(0..n);
        ious[k] = rng.random_range(0.55..1.0);
    }
    ious
}

fn random_targets(rng: &mut ChaCha8Rng, n: usize) -> Vec<RegressionTarget> {
    (0..n)
        .map(|_| RegressionTarget::from_array([0.0; 4].map(|_: f64| rng.random_range(-2.0..2.0))))
        .collect()
}

fn build_case(name: &str, rng: &mut ChaCha8Rng) -> (Vec<Tensor>, Loss) {
    match name {
        "matmul" => {
            let (k, n) = (rng.random_range(1..5), rng.random_range(1..5));
            let a = if rng.random_bool(0.5) {
                randn(rng, &[k], 1.5)
            } else {
                let m = rng.random_range(1..4);
                randn(rng, &[m, k], 1.5)
            };
            let b = randn(rng, &[k, n], 1.5);
            let rows = if a.shape().len() == 2 { a.shape()[0] } else { 1 };
            let w = coeffs(rng, rows * n);
            (vec![a, b], Box::new(move |g, v| {
                let y = g.matmul(v[0], v[1])?;
                readout(g, y, &w)
            }))
        }
        "add_bias" => {
            let (m, n) = (rng.random_range(1..4), rng.random_range(1..5));
            let x = if rng.random_bool(0.5) { randn(rng, &[n], 1.0) } else { randn(rng, &[m, n], 1.0) };
            let b = randn(rng, &[n], 1.0);
            let w = coeffs(rng, x.len());
            (vec![x, b], Box::new(move |g, v| {
                let y = g.add_bias(v[0], v[1])?;
                readout(g, y, &w)
            }))
        }
        "add" => binary(rng, |g, a, b| g.add(a, b)),
        "sub" => binary(rng, |g, a, b| g.sub(a, b)),
        "mul" => binary(rng, |g, a, b| g.mul(a, b)),
        "scale" => {
            let f = rng.random_range(-3.0..3.0);
            let n = rng.random_range(1..7);
            let x = randn(rng, &[n], 2.0);
            let w = coeffs(rng, n);
            (vec![x], Box::new(move |g, v| {
                let y = g.scale(v[0], f);
                readout(g, y, &w)
            }))
        }
        "add_scalar" => {
            let c = rng.random_range(-3.0..3.0);
            let n = rng.random_range(1..7);
            let x = randn(rng, &[n], 2.0);
            let w = coeffs(rng, n);
            (vec![x], Box::new(move |g, v| {
                let y = g.add_scalar(v[0], c);
                readout(g, y, &w)
            }))
        }
        "concat" => {
            let parts: Vec<Tensor> = (0..rng.random_range(1..4))
                .map(|_| {
                    let n = rng.random_range(1..4);
                    randn(rng, &[n], 1.0)
                })
                .collect();
            let total = parts.iter().map(|t| t.len()).sum();
            let w = coeffs(rng, total);
            (parts, Box::new(move |g, v| {
                let y = g.concat(v)?;
                readout(g, y, &w)
            }))
        }
        "relu" => unary(rng, 6, -2.0, 2.0, |g, x| Ok(g.relu(x))),
        "sigmoid" => unary(rng, 5, -4.0, 4.0, |g, x| Ok(g.sigmoid(x))),
        "tanh" => unary(rng, 5, -3.0, 3.0, |g, x| Ok(g.tanh(x))),
        "log" => unary(rng, 5, 0.1, 4.0, |g, x| g.log(x)),
        "softmax" => unary(rng, 5, -3.0, 3.0, |g, x| g.softmax(x)),
        "l2_normalize" => unary(rng, 5, -2.0, 2.0, |g, x| g.l2_normalize(x)),
        "sum" => unary(rng, 5, -2.0, 2.0, |g, x| Ok(g.sum(x))),
        "mean" => unary(rng, 5, -2.0, 2.0, |g, x| Ok(g.mean(x))),
        "smooth_l1" => unary(rng, 6, -3.0, 3.0, |g, x| Ok(g.smooth_l1(x))),
        "gather_row" => {
            let (rows, d) = (rng.random_range(1..6), rng.random_range(1..5));
            let table = randn(rng, &[rows, d], 1.0);
            let row = rng.random_range(0..rows);
            let w = coeffs(rng, d);
            (vec![table], Box::new(move |g, v| {
                let y = g.gather_row(v[0], row)?;
                readout(g, y, &w)
            }))
        }
        "lstm_step" => {
            let (d_in, d_h) = (rng.random_range(1..5), rng.random_range(1..5));
            let mut inputs = vec![randn(rng, &[d_in], 1.0), randn(rng, &[d_h], 1.0), randn(rng, &[d_h], 1.0)];
            inputs.extend(lstm_inputs(rng, d_in, d_h));
            let (wh, wc) = (coeffs(rng, d_h), coeffs(rng, d_h));
            (inputs, Box::new(move |g, v| {
                let (h, c) = lstm_step(g, &lstm_weights(&v[3..]), v[0], v[1], v[2])?;
                let a = readout(g, h, &wh)?;
                let b = readout(g, c, &wc)?;
                g.add(a, b)
            }))
        }
        "fuse" => {
            let (d_q, d_v, d_o) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..6));
            let mut inputs = vec![randn(rng, &[d_q], 1.0), randn(rng, &[d_v], 1.0)];
            inputs.extend(head_inputs(rng, d_q + d_v, d_o));
            let w = coeffs(rng, d_o);
            (inputs, Box::new(move |g, v| {
                let f = fuse(g, v[0], v[1], &head_weights(&v[2..]))?;
                readout(g, f, &w)
            }))
        }
        "score_all" => {
            let (n, d_o) = (rng.random_range(1..5), rng.random_range(1..5));
            let mut inputs: Vec<Tensor> = (0..n).map(|_| randn(rng, &[d_o], 1.0)).collect();
            inputs.extend(head_inputs(rng, 1, d_o));
            let (wr, wp) = (coeffs(rng, n), coeffs(rng, n));
            (inputs, Box::new(move |g, v| {
                let (raw, probs) = score_all(g, &v[..n], &head_weights(&v[n..]))?;
                let a = readout(g, raw, &wr)?;
                let b = readout(g, probs, &wp)?;
                g.add(a, b)
            }))
        }
        "regress_all" => {
            let (n, d_o) = (rng.random_range(1..5), rng.random_range(1..5));
            let mut inputs: Vec<Tensor> = (0..n).map(|_| randn(rng, &[d_o], 1.0)).collect();
            inputs.extend(head_inputs(rng, 1, d_o));
            let w = coeffs(rng, 4 * n);
            (inputs, Box::new(move |g, v| {
                let t = regress_all(g, &v[..n], &head_weights(&v[n..]))?;
                let all = g.concat(&t)?;
                readout(g, all, &w)
            }))
        }
        "kld_loss" => {
            let n = rng.random_range(2..8);
            let labels = soft_labels(&random_ious(rng, n, true), 0.5).unwrap();
            let z = randn(rng, &[n], 2.0);
            (vec![z], Box::new(move |g, v| {
                let p = g.softmax(v[0])?;
                kld_loss(g, &labels, p).map_err(loss_err)
            }))
        }
        "softmax_single_label_loss" => {
            let n = rng.random_range(1..8);
            let ious = random_ious(rng, n, false);
            let z = randn(rng, &[n], 2.0);
            (vec![z], Box::new(move |g, v| {
                let p = g.softmax(v[0])?;
                softmax_single_label_loss(g, p, &ious).map_err(loss_err)
            }))
        }
        "smooth_l1_reg_loss" => {
            let n = rng.random_range(1..5);
            let preds: Vec<Tensor> = (0..n).map(|_| randn(rng, &[4], 2.5)).collect();
            let targets = random_targets(rng, n);
            (preds, Box::new(move |g, v| smooth_l1_reg_loss(g, v, &targets).map_err(loss_err)))
        }
        "full_model" => full_model_case(rng),
        other => panic!("unknown gradient case {other}"),
    }
}

/// Embedding, LSTM, fusion, score and regression heads and the combined
/// objective, all parameters checked at once.
fn full_model_case(rng: &mut ChaCha8Rng) -> (Vec<Tensor>, Loss) {
    let (vocab, d_e, d_q, d_v, d_o) = (6, 3, 4, 3, 5);
    let n = rng.random_range(2..5);
    let len = rng.random_range(1..4);
    let tokens = TokenSequence((0..len).map(|_| rng.random_range(0..vocab)).collect());
    let visual: Vec<Vec<f64>> = (0..n).map(|_| coeffs(rng, d_v)).collect();
    let positive = rng.random_bool(0.8);
    let ious = random_ious(rng, n, positive);
    let targets = random_targets(rng, n);
    let config = LossConfig {
        gamma: rng.random_range(0.0..2.0),
        ranking: if rng.random_bool(0.5) { RankingLoss::Kld } else { RankingLoss::SoftmaxSingleLabel },
        regression: rng.random_bool(0.8),
        reg_mask_by_iou: rng.random_bool(0.5),
        ..LossConfig::default()
    };
    let mut inputs = vec![randn(rng, &[vocab, d_e], 1.0)];
    inputs.extend(lstm_inputs(rng, d_e, d_q));
    inputs.extend(head_inputs(rng, d_q + d_v, d_o));
    (inputs, Box::new(move |g, v| {
        let q = encode_query(g, v[0], &lstm_weights(&v[1..9]), &tokens)?;
        let head = head_weights(&v[9..]);
        let mut fused = Vec::new();
        for feat in &visual {
            let vis = g.constant_vector(feat.clone())?;
            fused.push(fuse(g, q, vis, &head)?);
        }
        let (_, probs) = score_all(g, &fused, &head)?;
        let offsets = regress_all(g, &fused, &head)?;
        let out = SampleOutputs { scores: probs, offsets };
        Ok(total_loss(g, &out, &ious, &targets, &config).map_err(loss_err)?.total)
    }))
}

pub const GRADIENT_CASES: &[&str] = &[
    "matmul",
    "add_bias",
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "concat",
    "relu",
    "sigmoid",
    "tanh",
    "log",
    "softmax",
    "l2_normalize",
    "sum",
    "mean",
    "gather_row",
    "smooth_l1",
    "lstm_step",
    "fuse",
    "score_all",
    "regress_all",
    "kld_loss",
    "softmax_single_label_loss",
    "smooth_l1_reg_loss",
    "full_model",
];

/// `cases` random draws per entry. Draws whose perturbation could cross a
/// ReLU or smooth-L1 kink are redrawn.
pub fn gradient_suite(names: &[&str], cases: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let mut worst: (f64, &str) = (0.0, "");
    let mut redraws = 0usize;
    for (k, &name) in names.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64 + 1) << 32));
        let mut done = 0;
        while done < cases {
            let (inputs, f) = build_case(name, &mut rng);
            let report: GradCheckReport = match check_gradients(&f, &inputs, DEFAULT_STEP) {
                Ok(r) => r,
                Err(e) => {
                    out.failures.push(format!("{name}: {e}"));
                    done += 1;
                    continue;
                }
            };
            if report.straddles_kink(DEFAULT_STEP) {
                redraws += 1;
                assert!(redraws < 100 * cases * names.len(), "too many kink redraws");
                continue;
            }
            done += 1;
            if report.max_relative_error > worst.0 {
                worst = (report.max_relative_error, name);
            }
            if !report.passes(DEFAULT_TOLERANCE) {
                out.failures.push(format!("{name} case {done}: {report:?}"));
            }
        }
    }
    out.summary = format!(
        "{} entries x {cases} cases, worst relative error {:.2e} ({}), {redraws} kink redraws",
        names.len(),
        worst.0,
        worst.1
    );
    out
}

// ---------------------------------------------------------------------------
// loss oracles

pub fn oracle_soft_labels(ious: &[f64], eta: f64) -> Option<Vec<f64>> {
    let mut kept = vec![0.0; ious.len()];
    let mut total = 0.0;
    for i in 0..ious.len() {
        if ious[i] > eta {
            kept[i] = ious[i];
            total += ious[i];
        }
    }
    if total == 0.0 {
        return None;
    }
    for v in kept.iter_mut() {
        *v /= total;
    }
    Some(kept)
}

pub fn oracle_kld(target: &[f64], probs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..target.len() {
        if target[i] > 0.0 {
            acc += target[i] * (target[i] / (probs[i] + 1e-12)).ln();
        }
    }
    acc / target.len() as f64
}

pub fn oracle_single_label(probs: &[f64], ious: &[f64]) -> f64 {
    let mut k = 0;
    for i in 1..ious.len() {
        if ious[i] > ious[k] {
            k = i;
        }
    }
    -(probs[k] + 1e-12).ln()
}

pub fn oracle_smooth_l1(preds: &[[f64; 4]], targets: &[[f64; 4]]) -> f64 {
    let mut acc = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        for c in 0..4 {
            let d = (p[c] - t[c]).abs();
            acc += if d < 1.0 { 0.5 * d * d } else { d - 0.5 };
        }
    }
    acc / preds.len() as f64
}

fn lib_kld(target: &[f64], probs: &[f64]) -> f64 {
    let mut g = Graph::new();
    let p = g.constant_vector(probs.to_vec()).unwrap();
    let labels = grounding::losses::SoftLabelDistribution {
        values: target.to_vec(),
        degenerate: false,
    };
    let l = kld_loss(&mut g, &labels, p).unwrap();
    g.scalar(l)
}

fn lib_single(probs: &[f64], ious: &[f64]) -> f64 {
    let mut g = Graph::new();
    let p = g.constant_vector(probs.to_vec()).unwrap();
    let l = softmax_single_label_loss(&mut g, p, ious).unwrap();
    g.scalar(l)
}

fn lib_smooth(preds: &[[f64; 4]], targets: &[[f64; 4]]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = preds.iter().map(|p| g.constant_vector(p.to_vec()).unwrap()).collect();
    let t: Vec<RegressionTarget> = targets.iter().map(|&a| RegressionTarget::from_array(a)).collect();
    let l = smooth_l1_reg_loss(&mut g, &vars, &t).unwrap();
    g.scalar(l)
}

fn lib_total(probs: &[f64], offsets: &[[f64; 4]], ious: &[f64], targets: &[[f64; 4]], cfg: &LossConfig) -> (f64, f64, Option<f64>, bool) {
    let mut g = Graph::new();
    let scores = g.constant_vector(probs.to_vec()).unwrap();
    let offsets = offsets.iter().map(|o| g.constant_vector(o.to_vec()).unwrap()).collect();
    let t: Vec<RegressionTarget> = targets.iter().map(|&a| RegressionTarget::from_array(a)).collect();
    let terms = total_loss(&mut g, &SampleOutputs { scores, offsets }, ious, &t, cfg).unwrap();
    (g.scalar(terms.total), terms.rank, terms.reg, terms.degenerate)
}

fn oracle_total(probs: &[f64], offsets: &[[f64; 4]], ious: &[f64], targets: &[[f64; 4]], cfg: &LossConfig) -> (f64, bool) {
    let labels = oracle_soft_labels(ious, cfg.eta);
    let rank = match (cfg.ranking, &labels) {
        (RankingLoss::Kld, Some(s)) => oracle_kld(s, probs),
        (RankingLoss::Kld, None) => 0.0,
        (RankingLoss::SoftmaxSingleLabel, _) => oracle_single_label(probs, ious),
    };
    let mut reg = 0.0;
    if cfg.regression {
        let keep: Vec<usize> = (0..ious.len()).filter(|&i| !cfg.reg_mask_by_iou || ious[i] > cfg.eta).collect();
        if !keep.is_empty() {
            let p: Vec<[f64; 4]> = keep.iter().map(|&i| offsets[i]).collect();
            let t: Vec<[f64; 4]> = keep.iter().map(|&i| targets[i]).collect();
            reg = oracle_smooth_l1(&p, &t);
        }
    }
    (rank + cfg.gamma * reg, labels.is_none())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0f64..4.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn random_quads(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<[f64; 4]> {
    (0..n).map(|_| [0.0; 4].map(|_: f64| rng.random_range(-scale..scale))).collect()
}

/// The worked examples, each to 1e-9.
pub fn loss_examples() -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let mut count = 0;
    let mut check = |what: &str, got: f64, want: f64| {
        count += 1;
        if (got - want).abs() > 1e-9 {
            out.failures.push(format!("{what}: got {got}, want {want}"));
        }
    };

    let s = soft_labels(&[0.8, 0.6, 0.3], 0.5).unwrap();
    check("soft label 0", s.values[0], 0.8 / 1.4);
    check("soft label 1", s.values[1], 0.6 / 1.4);
    check("soft label 2", s.values[2], 0.0);
    let s = soft_labels(&[0.9, 0.0, 0.0], 0.5).unwrap();
    check("single soft label", s.values[0], 1.0);
    let d = soft_labels(&[0.4, 0.3], 0.5).unwrap();
    check("degenerate flag", d.degenerate as u8 as f64, 1.0);

    check("kld [1,0] vs [.5,.5]", lib_kld(&[1.0, 0.0], &[0.5, 0.5]), 0.5 * 2f64.ln());
    check("single label one-hot", lib_single(&[1.0, 0.0, 0.0], &[0.9, 0.2, 0.1]), 0.0);
    check("single label uniform", lib_single(&[0.25; 4], &[0.1, 0.9, 0.3, 0.2]), 4f64.ln());
    check("single label tie", lib_single(&[0.7, 0.2, 0.1], &[0.8, 0.8, 0.1]), -(0.7f64 + 1e-12).ln());

    check("smooth l1 small", lib_smooth(&[[0.5, 0.0, 0.0, 0.0]], &[[0.0; 4]]), 0.125);
    check("smooth l1 large", lib_smooth(&[[2.0, 0.0, 0.0, 0.0]], &[[0.0; 4]]), 1.5);

    let probs = [0.5, 0.5];
    let ious = [0.9, 0.1];
    let offsets = [[0.5, 0.0, 0.0, 0.0], [0.0; 4]];
    let targets = [[0.0; 4]; 2];
    let masked = LossConfig { reg_mask_by_iou: true, ..LossConfig::default() };
    let (total, rank, _, _) = lib_total(&probs, &offsets, &ious, &targets, &masked);
    check("total rank part", rank, 0.5 * 2f64.ln());
    check("total = rank + reg", total, 0.5 * 2f64.ln() + 0.125);
    let no_reg_weight = LossConfig { gamma: 0.0, ..masked };
    check("gamma 0", lib_total(&probs, &offsets, &ious, &targets, &no_reg_weight).0, rank);
    let (total, rank, reg, degenerate) = lib_total(&probs, &offsets, &[0.3, 0.1], &targets, &LossConfig { gamma: 2.0, ..LossConfig::default() });
    check("degenerate rank skipped", rank, 0.0);
    check("degenerate flagged", degenerate as u8 as f64, 1.0);
    check("degenerate total = gamma reg", total, 2.0 * reg.unwrap());

    out.summary = format!("{count} worked examples");
    out
}

/// Random instances of every loss against the oracles above.
pub fn loss_brute_force(instances: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let n = rng.random_range(1..10);
        let eta = rng.random_range(0.1..0.9);
        let ious: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..=1.0) })
            .collect();
        let lib = soft_labels(&ious, eta).unwrap();
        match oracle_soft_labels(&ious, eta) {
            None if !lib.degenerate => out.failures.push(format!("instance {i}: expected degenerate")),
            Some(_) if lib.degenerate => out.failures.push(format!("instance {i}: unexpected degenerate")),
            Some(want) => {
                for (a, b) in lib.values.iter().zip(&want) {
                    worst = worst.max((a - b).abs());
                    if !close(*a, *b, 1e-9) {
                        out.failures.push(format!("instance {i}: soft labels {:?} vs {want:?}", lib.values));
                        break;
                    }
                }
            }
            None => {}
        }

        let probs = random_probs(&mut rng, n);
        if let Some(target) = oracle_soft_labels(&ious, eta) {
            let (a, b) = (lib_kld(&target, &probs), oracle_kld(&target, &probs));
            worst = worst.max((a - b).abs());
            if !close(a, b, 1e-9) {
                out.failures.push(format!("instance {i}: kld {a} vs {b}"));
            }
        }
        let (a, b) = (lib_single(&probs, &ious), oracle_single_label(&probs, &ious));
        worst = worst.max((a - b).abs());
        if !close(a, b, 1e-9) {
            out.failures.push(format!("instance {i}: single label {a} vs {b}"));
        }
        let preds = random_quads(&mut rng, n, 3.0);
        let targets = random_quads(&mut rng, n, 3.0);
        let (a, b) = (lib_smooth(&preds, &targets), oracle_smooth_l1(&preds, &targets));
        worst = worst.max((a - b).abs());
        if !close(a, b, 1e-9) {
            out.failures.push(format!("instance {i}: smooth l1 {a} vs {b}"));
        }

        let cfg = LossConfig {
            eta,
            gamma: rng.random_range(0.0..3.0),
            ranking: if rng.random_bool(0.5) { RankingLoss::Kld } else { RankingLoss::SoftmaxSingleLabel },
            regression: rng.random_bool(0.7),
            reg_mask_by_iou: rng.random_bool(0.5),
        };
        let (total, _, _, degenerate) = lib_total(&probs, &preds, &ious, &targets, &cfg);
        let (want, want_degenerate) = oracle_total(&probs, &preds, &ious, &targets, &cfg);
        worst = worst.max((total - want).abs());
        if !close(total, want, 1e-9) || degenerate != want_degenerate {
            out.failures.push(format!("instance {i}: total {total} ({degenerate}) vs {want} ({want_degenerate}) {cfg:?}"));
        }
    }
    out.summary = format!("{instances} random instances, worst deviation {worst:.1e}");
    out
}

// ---------------------------------------------------------------------------
// metric oracles

fn oracle_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)
}

/// Integer corners on a small grid so exact 0.5 overlaps happen often.
fn grid_box(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let x0 = rng.random_range(0..16) as f64;
    let y0 = rng.random_range(0..16) as f64;
    let w = rng.random_range(1..8) as f64;
    let h = rng.random_range(1..8) as f64;
    [x0, y0, x0 + w, y0 + h]
}

fn bbox(a: [f64; 4]) -> BBox {
    BBox::new(a[0], a[1], a[2], a[3]).unwrap()
}

/// Random datasets scored by a plain double loop; results must agree exactly.
pub fn metric_oracle_suite(instances: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let image = ImageSize::new(24.0, 24.0).unwrap();
    let mut half_hits = 0;
    for i in 0..instances {
        let m = rng.random_range(1..12);
        let mut raw: Vec<(Vec<[f64; 4]>, [f64; 4])> = Vec::new();
        for _ in 0..m {
            let gt = grid_box(&mut rng);
            let n = rng.random_range(1..9);
            let props = (0..n)
                .map(|_| if rng.random_bool(0.3) { [gt[0], gt[1], gt[2], gt[1] + (gt[3] - gt[1]) / 2.0] } else { grid_box(&mut rng) })
                .collect();
            raw.push((props, gt));
        }

        let mut hit = 0.0;
        let mut covered = 0.0;
        let mut correct = 0.0;
        for (props, gt) in &raw {
            let mut any = false;
            for p in props {
                let v = oracle_iou(*p, *gt);
                if v == 0.5 {
                    half_hits += 1;
                }
                if v > 0.5 {
                    covered += 1.0;
                    any = true;
                }
            }
            if any {
                hit += 1.0;
            }
            if oracle_iou(props[0], *gt) > 0.5 {
                correct += 1.0;
            }
        }
        let want_dis = hit / m as f64;
        let want_div = if covered == 0.0 { None } else { Some(1.0 / (covered / m as f64)) };
        let want_acc = correct / m as f64;

        let samples: Vec<EvalSample> = raw
            .iter()
            .map(|(p, g)| EvalSample { proposals: p.iter().map(|&b| bbox(b)).collect(), gt: bbox(*g), image })
            .collect();
        let dis = discrimination_score(&samples, 0.5).unwrap();
        let div = diversity_score(&samples, 0.5).unwrap();
        let firsts: Vec<BBox> = samples.iter().map(|s| s.proposals[0]).collect();
        let gts: Vec<BBox> = samples.iter().map(|s| s.gt).collect();
        let acc = grounding_accuracy(&firsts, &gts, 0.5).unwrap();
        if dis != want_dis || div.value != want_div || acc != want_acc || div.value.is_none() != div.reason.is_some() {
            out.failures.push(format!(
                "instance {i}: dis {dis} vs {want_dis}, div {:?} vs {want_div:?}, acc {acc} vs {want_acc}",
                div.value
            ));
        }
    }

    // The boundary itself: IoU of exactly 0.5 does not cover.
    let gt = bbox([0.0, 0.0, 10.0, 10.0]);
    let half = bbox([0.0, 0.0, 10.0, 5.0]);
    let just_over = bbox([0.0, 0.0, 10.0, 5.000001]);
    let sample = |p: BBox| EvalSample { proposals: vec![p], gt, image: ImageSize::new(10.0, 10.0).unwrap() };
    if iou(&half, &gt) != 0.5 || discrimination_score(&[sample(half)], 0.5).unwrap() != 0.0 {
        out.failures.push("IoU exactly 0.5 counted as covering".into());
    }
    if discrimination_score(&[sample(just_over)], 0.5).unwrap() != 1.0 {
        out.failures.push("IoU just above 0.5 not counted".into());
    }
    out.summary = format!("{instances} random datasets, {half_hits} proposals exactly at IoU 0.5");
    out
}

// ---------------------------------------------------------------------------
// geometry

fn float_box(rng: &mut ChaCha8Rng, max_side: f64) -> BBox {
    let x = rng.random_range(0.0..100.0);
    let y = rng.random_range(0.0..100.0);
    let w = rng.random_range(0.5..max_side);
    let h = rng.random_range(0.5..max_side);
    BBox::new(x, y, x + w, y + h).unwrap()
}

/// IoU symmetry, range and self-overlap on random pairs, plus the
/// offset encode/decode round trip.
pub fn geometry_suite(pairs: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_round_trip = 0.0f64;
    for i in 0..pairs {
        let a = float_box(&mut rng, 60.0);
        let b = float_box(&mut rng, 60.0);
        let (ab, ba) = (iou(&a, &b), iou(&b, &a));
        if ab != ba || !(0.0..=1.0).contains(&ab) || iou(&a, &a) != 1.0 {
            out.failures.push(format!("pair {i}: iou {ab} / {ba} / self {}", iou(&a, &a)));
        }
        let want = oracle_iou(a.to_array(), b.to_array());
        if (ab - want).abs() > 1e-12 {
            out.failures.push(format!("pair {i}: iou {ab} vs oracle {want}"));
        }
        // Targets at least one pixel wide, where encoding is invertible.
        let t = BBox::new(b.x_tl(), b.y_tl(), b.x_tl() + b.width().max(1.0), b.y_tl() + b.height().max(1.0)).unwrap();
        let offsets = encode_regression(&a, &t).unwrap();
        let back = decode_unclipped(&a, &offsets).unwrap();
        let err = back
            .to_array()
            .iter()
            .zip(t.to_array())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst_round_trip = worst_round_trip.max(err);
        if err >= 1e-6 {
            out.failures.push(format!("pair {i}: round trip error {err}"));
        }
    }
    out.summary = format!("{pairs} random pairs, worst round-trip error {worst_round_trip:.1e}");
    out
}
