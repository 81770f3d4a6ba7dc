//! Minimal DM/UM pairs for the nine environment classes, the pairs TSV
//! format, and the synthetic training corpus.

mod synth;
pub mod templates;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EnvClass, Sentence};
use crate::error::{Error, Result};

pub use synth::{generate_synth_corpus, SynthConfig};
pub use templates::WordLists;

/// A DM sentence and its minimally different UM counterpart. Both share the
/// NPI and everything after it; the prefixes differ only in the licensor
/// region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalPair {
    pub pair_id: String,
    pub env: EnvClass,
    pub npi: Vec<String>,
    pub dm_full: Sentence,
    pub um_full: Sentence,
    /// 0-based token index of the NPI start in `dm_full`.
    pub npi_index_dm: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairDefect {
    EmptyNpi,
    EmptyPrefix,
    NpiIndexOutOfRange,
    NpiMismatch { side: &'static str, index: usize },
    ContinuationMismatch { dm_index: usize },
    IdenticalPrefixes,
}

impl fmt::Display for PairDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairDefect::EmptyNpi => f.write_str("NPI expression is empty"),
            PairDefect::EmptyPrefix => f.write_str("NPI has no preceding context"),
            PairDefect::NpiIndexOutOfRange => f.write_str("NPI index out of range"),
            PairDefect::NpiMismatch { side, index } => {
                write!(f, "NPI not found in {side} sentence at token {index}")
            }
            PairDefect::ContinuationMismatch { dm_index } => {
                write!(f, "continuations differ at DM token {dm_index}")
            }
            PairDefect::IdenticalPrefixes => f.write_str("DM and UM prefixes are identical"),
        }
    }
}

fn is_final_punct(token: &str) -> bool {
    matches!(token, "." | "?" | "!")
}

impl MinimalPair {
    /// Tokens strictly before the NPI in the DM sentence.
    pub fn dm_prefix(&self) -> &[String] {
        let tokens = self.dm_full.tokens();
        &tokens[..self.npi_index_dm.min(tokens.len())]
    }

    /// Number of DM tokens from the NPI onward.
    fn suffix_len(&self) -> usize {
        self.dm_full.len().saturating_sub(self.npi_index_dm)
    }

    /// NPI position in the UM sentence, aligned from the sentence end.
    pub fn npi_index_um(&self) -> Option<usize> {
        self.um_full.len().checked_sub(self.suffix_len())
    }

    pub fn um_prefix(&self) -> Option<&[String]> {
        self.npi_index_um().map(|i| &self.um_full.tokens()[..i])
    }

    /// Checks the minimal-pair structure. Simple questions may differ in
    /// their final punctuation token, since the question mark is the
    /// licensor there.
    pub fn validate(&self) -> Result<(), PairDefect> {
        let dm = self.dm_full.tokens();
        let um = self.um_full.tokens();
        if self.npi.is_empty() {
            return Err(PairDefect::EmptyNpi);
        }
        if self.npi_index_dm + self.npi.len() > dm.len() {
            return Err(PairDefect::NpiIndexOutOfRange);
        }
        if self.npi_index_dm == 0 {
            return Err(PairDefect::EmptyPrefix);
        }
        if dm[self.npi_index_dm..self.npi_index_dm + self.npi.len()] != self.npi[..] {
            return Err(PairDefect::NpiMismatch {
                side: "DM",
                index: self.npi_index_dm,
            });
        }
        let um_index = self.npi_index_um().ok_or(PairDefect::NpiIndexOutOfRange)?;
        if um_index == 0 {
            return Err(PairDefect::EmptyPrefix);
        }
        if um[um_index..um_index + self.npi.len()] != self.npi[..] {
            return Err(PairDefect::NpiMismatch {
                side: "UM",
                index: um_index,
            });
        }
        let dm_rest = &dm[self.npi_index_dm + self.npi.len()..];
        let um_rest = &um[um_index + self.npi.len()..];
        let last = dm_rest.len().saturating_sub(1);
        for (k, (a, b)) in dm_rest.iter().zip(um_rest).enumerate() {
            let punct_swap = self.env == EnvClass::SmpQ
                && k == last
                && is_final_punct(a)
                && is_final_punct(b);
            if a != b && !punct_swap {
                return Err(PairDefect::ContinuationMismatch {
                    dm_index: self.npi_index_dm + self.npi.len() + k,
                });
            }
        }
        if self.dm_prefix() == &um[..um_index] {
            return Err(PairDefect::IdenticalPrefixes);
        }
        Ok(())
    }
}

/// Draws `n` pairs for `env` from its frames. Deterministic in `seed`;
/// duplicates are avoided while the frame space allows.
pub fn generate_pairs(env: EnvClass, n: usize, seed: u64) -> Result<Vec<MinimalPair>> {
    generate_pairs_with(env, n, seed, &WordLists::default())
}

pub fn generate_pairs_with(
    env: EnvClass,
    n: usize,
    seed: u64,
    words: &WordLists,
) -> Result<Vec<MinimalPair>> {
    let frames: Vec<_> = templates::frames_for(env).collect();
    if frames.is_empty() {
        return Err(Error::UnknownEnvClass(env.to_string()));
    }
    words.validate().map_err(Error::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(n);
    let max_attempts = 50 * n.max(1);
    let mut attempts = 0;
    while pairs.len() < n {
        attempts += 1;
        let frame = frames.choose(&mut rng).unwrap();
        let inst = frame.instantiate(words, &mut rng);
        let dm = inst.dm_with_npi(None);
        if !seen.insert(dm.clone()) && attempts < max_attempts {
            continue;
        }
        let pair = MinimalPair {
            pair_id: format!("{}-{:06}", env, pairs.len()),
            env,
            npi: inst.npi.clone(),
            npi_index_dm: inst.dm_prefix.len(),
            dm_full: Sentence::new(dm)?,
            um_full: Sentence::new(inst.um_with_npi())?,
        };
        debug_assert_eq!(pair.validate(), Ok(()));
        pairs.push(pair);
    }
    Ok(pairs)
}

const TSV_COLUMNS: usize = 6;

fn tsv_row(pair: &MinimalPair) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        pair.pair_id,
        pair.env,
        pair.npi.join(" "),
        pair.dm_full,
        pair.um_full,
        pair.npi_index_dm
    )
}

/// Writes pairs as TSV: pair_id, env_class, npi, dm_full, um_full,
/// npi_index_dm. No header row.
pub fn write_pairs(pairs: &[MinimalPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for pair in pairs {
        writeln!(out, "{}", tsv_row(pair)).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedPairs {
    pub pairs: Vec<MinimalPair>,
    pub errors: Vec<RowError>,
}

fn parse_row(line: &str) -> std::result::Result<MinimalPair, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != TSV_COLUMNS {
        return Err(format!(
            "expected {TSV_COLUMNS} columns, found {}",
            cols.len()
        ));
    }
    let env: EnvClass = cols[1].parse().map_err(|e: Error| e.to_string())?;
    let npi: Vec<String> = cols[2].split_whitespace().map(str::to_string).collect();
    let dm_full = Sentence::parse(cols[3]).map_err(|e| e.to_string())?;
    let um_full = Sentence::parse(cols[4]).map_err(|e| e.to_string())?;
    let npi_index_dm: usize = cols[5]
        .trim()
        .parse()
        .map_err(|_| format!("bad NPI index `{}`", cols[5]))?;
    let pair = MinimalPair {
        pair_id: cols[0].to_string(),
        env,
        npi,
        dm_full,
        um_full,
        npi_index_dm,
    };
    pair.validate().map_err(|d| d.to_string())?;
    Ok(pair)
}

/// Parses pairs TSV text. Malformed rows are reported with their 1-based
/// line number and skipped.
pub fn parse_pairs(text: &str) -> LoadedPairs {
    let mut loaded = LoadedPairs::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match parse_row(line) {
            Ok(pair) => loaded.pairs.push(pair),
            Err(reason) => loaded.errors.push(RowError { line: i + 1, reason }),
        }
    }
    loaded
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<LoadedPairs> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_pairs(&text))
}
