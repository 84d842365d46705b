use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<unk>";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("query phrase is empty after tokenization")]
    EmptyPhrase,
    #[error("vocabulary file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense token indices. Index 0 is padding and index 1 is the
/// out-of-vocabulary bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// Vocabulary indices of one query, in reading order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence(pub Vec<usize>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Vocabulary {
    /// Builds a vocabulary from tokens listed in index order, after the two
    /// reserved entries.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
        all.extend(tokens.into_iter().map(Into::into));
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens: all, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// One token per line; line number is the index.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let lines: Vec<&str> = text.lines().collect();
        for (i, expected) in [PAD_TOKEN, OOV_TOKEN].iter().enumerate() {
            if lines.get(i) != Some(expected) {
                return Err(VocabError::Malformed {
                    line: i + 1,
                    reason: format!("expected reserved token {expected}"),
                });
            }
        }
        let mut seen = HashMap::new();
        for (i, t) in lines.iter().enumerate().skip(2) {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(VocabError::Malformed {
                    line: i + 1,
                    reason: format!("invalid token {t:?}"),
                });
            }
            if seen.insert(*t, i).is_some() || *t == PAD_TOKEN || *t == OOV_TOKEN {
                return Err(VocabError::Malformed {
                    line: i + 1,
                    reason: format!("duplicate token {t:?}"),
                });
            }
        }
        Ok(Self::from_tokens(lines.into_iter().skip(2)))
    }

    pub fn write(&self, path: &Path) -> Result<(), VocabError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, VocabError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Tokens seen at least `min_freq` times get indices, ordered by descending
/// frequency and then lexicographically.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_freq: usize) -> Result<Vocabulary, VocabError> {
    if corpus.iter().all(|q| q.is_empty()) {
        return Err(VocabError::EmptyCorpus);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for token in corpus.iter().flatten() {
        *counts.entry(token.as_ref().to_lowercase()).or_default() += 1;
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq.max(1) && t != PAD_TOKEN && t != OOV_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t)))
}

/// Lowercases and splits on whitespace; unknown words map to [`OOV`].
pub fn tokenize(phrase: &str, vocab: &Vocabulary) -> Result<TokenSequence, VocabError> {
    let ids: Vec<usize> = phrase
        .split_whitespace()
        .map(|w| vocab.index_of(&w.to_lowercase()))
        .collect();
    if ids.is_empty() {
        return Err(VocabError::EmptyPhrase);
    }
    Ok(TokenSequence(ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Vec<String>> {
        ["red ball", "red cube"]
            .iter()
            .map(|p| p.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn builds_with_reserved_slots() {
        let v = build_vocab(&corpus(), 1).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "red", "ball", "cube"]);
        assert_eq!(v.index_of("red"), 2);
    }

    #[test]
    fn min_freq_drops_rare_tokens() {
        let v = build_vocab(&corpus(), 2).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.index_of("ball"), OOV);
        assert_eq!(v.index_of("cube"), OOV);
    }

    #[test]
    fn deterministic_assignment() {
        assert_eq!(build_vocab(&corpus(), 1).unwrap(), build_vocab(&corpus(), 1).unwrap());
    }

    #[test]
    fn empty_corpus_rejected() {
        let empty: Vec<Vec<String>> = Vec::new();
        assert!(matches!(build_vocab(&empty, 1), Err(VocabError::EmptyCorpus)));
    }

    #[test]
    fn tokenize_normalizes_and_falls_back() {
        let v = build_vocab(&corpus(), 1).unwrap();
        let t = tokenize("Red  Ball", &v).unwrap();
        assert_eq!(t.0, vec![v.index_of("red"), v.index_of("ball")]);
        assert_eq!(tokenize("zebra", &v).unwrap().0, vec![OOV]);
        assert_eq!(tokenize("a b c d", &v).unwrap().len(), 4);
        assert!(matches!(tokenize("  \t", &v), Err(VocabError::EmptyPhrase)));
    }

    #[test]
    fn text_round_trip_and_header_check() {
        let v = build_vocab(&corpus(), 1).unwrap();
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
        assert!(matches!(
            Vocabulary::from_text("red\nball\n"),
            Err(VocabError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            Vocabulary::from_text("<pad>\n<unk>\nred\nred\n"),
            Err(VocabError::Malformed { line: 4, .. })
        ));
    }
}
