use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

/// Bidirectional token/id map. Regular tokens occupy ids `0..size-2` in
/// descending frequency order (ties broken lexicographically), followed by
/// `<unk>` and `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    unk_id: usize,
    eos_id: usize,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent tokens of `corpus`.
    pub fn build(corpus: &Corpus, max_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(Error::Config("vocabulary max_size must be >= 1".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for token in corpus.sentences.iter().flat_map(Sentence::tokens) {
            if token != UNK && token != EOS {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size);
        Ok(Self::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string())))
    }

    /// Builds a vocabulary from regular tokens in id order; specials are
    /// appended.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut id_to_token: Vec<String> = tokens
            .into_iter()
            .filter(|t| t != UNK && t != EOS)
            .collect();
        let unk_id = id_to_token.len();
        id_to_token.push(UNK.to_string());
        id_to_token.push(EOS.to_string());
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            token_to_id,
            id_to_token,
            unk_id,
            eos_id: unk_id + 1,
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn eos_id(&self) -> usize {
        self.eos_id
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(self.unk_id)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn encode_sentence(&self, sentence: &[String]) -> Vec<usize> {
        sentence.iter().map(|t| self.id_or_unk(t)).collect()
    }

    /// Maps tokens to ids, returning `None` if any token is out of vocabulary.
    pub fn encode_strict(&self, tokens: &[String]) -> Option<Vec<usize>> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Encodes a corpus into one contiguous id stream, each sentence
    /// followed by `<eos>`.
    pub fn encode(&self, corpus: &Corpus) -> Vec<usize> {
        let mut stream = Vec::with_capacity(corpus.num_tokens() + corpus.len());
        for sentence in &corpus.sentences {
            stream.extend(sentence.tokens().iter().map(|t| self.id_or_unk(t)));
            stream.push(self.eos_id);
        }
        stream
    }

    /// Inverse of [`Vocabulary::encode`]: splits the stream at `<eos>` and
    /// maps ids back to tokens.
    pub fn decode(&self, ids: &[usize]) -> Result<Vec<Vec<String>>> {
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        for &id in ids {
            if id == self.eos_id {
                sentences.push(std::mem::take(&mut current));
                continue;
            }
            let token = self.token(id).ok_or(Error::TokenOutOfRange {
                id,
                vocab_size: self.size(),
            })?;
            current.push(token.to_string());
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        Ok(sentences)
    }

    /// One token per line in id order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.id_to_token.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<&str> = text.lines().collect();
        match tokens.as_slice() {
            [.., unk, eos] if *unk == UNK && *eos == EOS => {}
            _ => {
                return Err(Error::Config(format!(
                    "{}: vocabulary file must end with {UNK} and {EOS}",
                    path.display()
                )))
            }
        }
        let vocab = Self::from_tokens(tokens.iter().map(|t| t.to_string()));
        if vocab.size() != tokens.len() {
            return Err(Error::Config(format!(
                "{}: duplicate or special tokens inside the vocabulary",
                path.display()
            )));
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceLabel;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_lines(lines.iter().copied(), SourceLabel::Full).unwrap()
    }

    #[test]
    fn truncates_by_frequency() {
        let vocab = Vocabulary::build(&corpus(&["a a b", "b a c"]), 2).unwrap();
        assert_eq!(vocab.tokens(), ["a", "b", UNK, EOS]);
        assert_eq!(vocab.id("a"), Some(0));
        assert_eq!(vocab.id("b"), Some(1));
        assert_eq!(vocab.id("c"), None);
        assert_ne!(vocab.unk_id(), vocab.eos_id());
    }

    #[test]
    fn ties_break_lexicographically() {
        let vocab = Vocabulary::build(&corpus(&["z y x", "y z x"]), 2).unwrap();
        assert_eq!(vocab.tokens(), ["x", "y", UNK, EOS]);
    }

    #[test]
    fn empty_corpus_gives_specials_only() {
        let vocab = Vocabulary::build(&corpus(&[]), 5).unwrap();
        assert_eq!(vocab.size(), 2);
        assert_eq!(vocab.tokens(), [UNK, EOS]);
    }

    #[test]
    fn no_truncation_means_no_unk() {
        let c = corpus(&["a b c", "d e a"]);
        let vocab = Vocabulary::build(&c, 100).unwrap();
        assert!(!vocab.encode(&c).contains(&vocab.unk_id()));
    }

    #[test]
    fn encode_maps_oov_and_appends_eos() {
        let vocab = Vocabulary::build(&corpus(&["a b a"]), 2).unwrap();
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        assert_eq!(vocab.encode(&corpus(&["a b"])), [a, b, vocab.eos_id()]);
        assert_eq!(
            vocab.encode(&corpus(&["a z"])),
            [a, vocab.unk_id(), vocab.eos_id()]
        );
    }

    #[test]
    fn decode_round_trips() {
        let c = corpus(&["the cat sat", "a dog ?"]);
        let vocab = Vocabulary::build(&c, 10).unwrap();
        let decoded = vocab.decode(&vocab.encode(&c)).unwrap();
        let original: Vec<Vec<String>> =
            c.sentences.iter().map(|s| s.tokens().to_vec()).collect();
        assert_eq!(decoded, original);
        assert!(vocab.decode(&[99]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let vocab = Vocabulary::build(&corpus(&["b a b c"]), 10).unwrap();
        vocab.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), vocab);
        fs::write(&path, "a\nb\n").unwrap();
        assert!(Vocabulary::load(&path).is_err());
    }

    #[test]
    fn zero_max_size_is_rejected() {
        assert!(Vocabulary::build(&corpus(&["a"]), 0).is_err());
    }
}
