//! Query side: vocabulary, tokenization and the LSTM phrase encoder.

mod encoder;
mod vocab;

pub use encoder::{encode_query, lstm_step, LstmWeights};
pub use vocab::{build_vocab, tokenize, TokenSequence, VocabError, Vocabulary, OOV, OOV_TOKEN, PAD, PAD_TOKEN};
