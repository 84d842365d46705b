use crate::tensor::{Graph, TensorError, Var};

use super::TokenSequence;

/// Graph handles for a one-layer LSTM. Every gate weight is
/// `[d_in + d_hidden, d_hidden]` and acts on `[x_t ; h_{t-1}]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights {
    pub w_input: Var,
    pub w_forget: Var,
    pub w_output: Var,
    pub w_cell: Var,
    pub b_input: Var,
    pub b_forget: Var,
    pub b_output: Var,
    pub b_cell: Var,
}

impl LstmWeights {
    pub fn hidden_size(&self, g: &Graph) -> usize {
        g.shape(self.b_input)[0]
    }
}

fn gate(g: &mut Graph, xh: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let z = g.matmul(xh, w)?;
    g.add_bias(z, b)
}

/// One standard LSTM step (no peepholes). Returns `(h_t, c_t)`.
pub fn lstm_step(
    g: &mut Graph,
    lstm: &LstmWeights,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var), TensorError> {
    let xh = g.concat(&[x, h])?;
    let i = gate(g, xh, lstm.w_input, lstm.b_input)?;
    let i = g.sigmoid(i);
    let f = gate(g, xh, lstm.w_forget, lstm.b_forget)?;
    let f = g.sigmoid(f);
    let o = gate(g, xh, lstm.w_output, lstm.b_output)?;
    let o = g.sigmoid(o);
    let cand = gate(g, xh, lstm.w_cell, lstm.b_cell)?;
    let cand = g.tanh(cand);

    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let squashed = g.tanh(c_next);
    let h_next = g.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Embeds every token, runs the LSTM left to right from a zero state and
/// returns the hidden state after the last token.
pub fn encode_query(
    g: &mut Graph,
    embedding: Var,
    lstm: &LstmWeights,
    tokens: &TokenSequence,
) -> Result<Var, TensorError> {
    if tokens.is_empty() {
        return Err(TensorError::InvalidShape {
            kernel: "encode_query",
            expected: "at least one token",
            shape: vec![0],
        });
    }
    let hidden = lstm.hidden_size(g);
    let mut h = g.constant_vector(vec![0.0; hidden])?;
    let mut c = g.constant_vector(vec![0.0; hidden])?;
    for &token in &tokens.0 {
        let x = g.gather_row(embedding, token)?;
        (h, c) = lstm_step(g, lstm, x, h, c)?;
    }
    Ok(h)
}
