//! Tokenizes a few phrases and encodes them with an untrained LSTM.
//!
//! cargo run --release --example query_encoder ["the red cube left of the blue ball"]

use grounding::model::{GroundingModel, ModelDims};
use grounding::query::{build_vocab, encode_query, tokenize};
use grounding::synth::{query_lexicon, SceneConfig};
use grounding::tensor::Graph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> grounding::Result<()> {
    let vocab = build_vocab(&[query_lexicon(&SceneConfig::default())], 1)?;
    println!("vocabulary ({} tokens): {}", vocab.len(), vocab.tokens().join(" "));

    let dims = ModelDims { d_v: 4, d_e: 8, d_q: 6, d_o: 4, vocab_size: vocab.len(), refine: false };
    let model = GroundingModel::new(dims, vocab.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;

    let mut phrases: Vec<String> = std::env::args().skip(1).collect();
    if phrases.is_empty() {
        phrases = ["the red cube", "the red cube left of the blue ball", "the RED purple thing"]
            .map(String::from)
            .to_vec();
    }
    for phrase in &phrases {
        let tokens = tokenize(phrase, &vocab)?;
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let q = encode_query(&mut g, bound.embedding, &bound.lstm, &tokens)?;
        let q: Vec<String> = g.value(q).iter().map(|v| format!("{v:+.3}")).collect();
        println!("{phrase:?}\n  ids {:?}\n  q   [{}]", tokens.0, q.join(", "));
    }
    Ok(())
}
