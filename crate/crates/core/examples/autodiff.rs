//! Fits a tiny two-layer network with the tape-based autodiff and Adam, then
//! checks its gradients against central differences.
//!
//! cargo run --release --example autodiff

use grounding::gradcheck::{check_gradients, DEFAULT_STEP, DEFAULT_TOLERANCE};
use grounding::tensor::{xavier_uniform, Adam, AdamConfig, Graph, ParamStore, Tensor, TensorError, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// y = tanh(x W1 + b1) W2, squared error against a fixed target.
fn loss(g: &mut Graph, p: &[Var], x: &[f64], target: f64) -> Result<Var, TensorError> {
    let x = g.constant_vector(x.to_vec())?;
    let h = g.matmul(x, p[0])?;
    let h = g.add_bias(h, p[1])?;
    let h = g.tanh(h);
    let y = g.matmul(h, p[2])?;
    let err = g.add_scalar(y, -target);
    let sq = g.mul(err, err)?;
    Ok(g.sum(sq))
}

fn main() -> Result<(), TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ParamStore::new();
    params.insert("w1", xavier_uniform(&[3, 8], &mut rng)?);
    params.insert("b1", Tensor::zeros(&[8])?.tracked());
    params.insert("w2", xavier_uniform(&[8, 1], &mut rng)?);

    let data = [([1.0, 0.0, -1.0], 0.5), ([0.0, 1.0, 1.0], -0.3), ([1.0, 1.0, 0.0], 0.8)];
    let mut adam = Adam::new(AdamConfig { learning_rate: 0.05, ..AdamConfig::default() }, params.tensors());
    for step in 0..=200 {
        let mut total = 0.0;
        for (x, t) in &data {
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let l = loss(&mut g, &bound, x, *t)?;
            total += g.scalar(l);
            params.accumulate(&g.backward(l)?, &bound)?;
        }
        params.scale_grads(1.0 / data.len() as f64);
        adam.step(params.tensors_mut())?;
        if step % 50 == 0 {
            println!("step {step:>3}  mean loss {:.6}", total / data.len() as f64);
        }
    }

    let (x, t) = data[0];
    let report = check_gradients(|g, v| loss(g, v, &x, t), params.tensors(), DEFAULT_STEP)?;
    println!(
        "gradient check over {} entries: max relative error {:.2e} ({})",
        report.checked,
        report.max_relative_error,
        if report.passes(DEFAULT_TOLERANCE) { "ok" } else { "MISMATCH" }
    );
    Ok(())
}
