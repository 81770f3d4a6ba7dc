//! Corpora, vocabularies, NPI and licensor detection, and the two corpus
//! filters (NO-NPI and NO-ENV).
//!
//! Corpora are pre-tokenized: one sentence per line, tokens separated by
//! whitespace. No tokenization beyond whitespace splitting is performed.

mod filter;
mod lexicon;
mod vocab;

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{filter_no_env, filter_no_npi, RemovalStats};
pub use lexicon::{
    contains_npi, in_licensed_environment, EnvClass, LicensorLexicon, LicensorPattern, MatchSpan,
    NpiLexicon, PatternToken, DEFAULT_LICENSORS, DEFAULT_NPI_LEXICON,
};
pub use vocab::{Vocabulary, EOS, UNK};

/// A non-empty sequence of whitespace-free tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidSentence("sentence has no tokens".into()));
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::InvalidSentence(format!("bad token {bad:?}")));
        }
        Ok(Self { tokens })
    }

    /// Splits a line on whitespace.
    pub fn parse(line: &str) -> Result<Self> {
        Self::new(line.split_whitespace())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

impl FromStr for Sentence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Where a corpus came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceLabel {
    Full,
    NoNpi,
    NoEnv(EnvClass),
    Synth,
}

impl fmt::Display for SourceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceLabel::Full => f.write_str("FULL"),
            SourceLabel::NoNpi => f.write_str("NO-NPI"),
            SourceLabel::NoEnv(env) => write!(f, "NO-ENV({env})"),
            SourceLabel::Synth => f.write_str("SYNTH"),
        }
    }
}

impl FromStr for SourceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FULL" => Ok(SourceLabel::Full),
            "NO-NPI" => Ok(SourceLabel::NoNpi),
            "SYNTH" => Ok(SourceLabel::Synth),
            _ => s
                .strip_prefix("NO-ENV(")
                .and_then(|rest| rest.strip_suffix(')'))
                .ok_or_else(|| Error::Config(format!("unknown corpus label `{s}`")))
                .and_then(|env| env.parse().map(SourceLabel::NoEnv)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub label: SourceLabel,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>, label: SourceLabel) -> Self {
        Self { sentences, label }
    }

    /// Builds a corpus from whitespace-tokenized lines, skipping blank lines.
    pub fn from_lines<'a>(
        lines: impl IntoIterator<Item = &'a str>,
        label: SourceLabel,
    ) -> Result<Self> {
        let sentences = lines
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .map(Sentence::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(sentences, label))
    }

    pub fn read(path: impl AsRef<Path>, label: SourceLabel) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_lines(text.lines(), label)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for sentence in &self.sentences {
            writeln!(out, "{sentence}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_rejects_empty_and_whitespace_tokens() {
        assert!(Sentence::parse("   ").is_err());
        assert!(Sentence::new(["a b"]).is_err());
        assert!(Sentence::new([""]).is_err());
        assert_eq!(Sentence::parse(" a  b ").unwrap().tokens(), ["a", "b"]);
    }

    #[test]
    fn corpus_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        let corpus = Corpus::from_lines(["a b c", "", "D e ?"], SourceLabel::Full).unwrap();
        assert_eq!(corpus.len(), 2);
        corpus.write(&path).unwrap();
        let back = Corpus::read(&path, SourceLabel::Full).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn source_label_round_trip() {
        for label in [
            SourceLabel::Full,
            SourceLabel::NoNpi,
            SourceLabel::Synth,
            SourceLabel::NoEnv(EnvClass::SmpQ),
        ] {
            assert_eq!(label.to_string().parse::<SourceLabel>().unwrap(), label);
        }
    }
}
