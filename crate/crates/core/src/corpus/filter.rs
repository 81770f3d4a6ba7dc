use serde::{Deserialize, Serialize};

use crate::corpus::{
    contains_npi, in_licensed_environment, Corpus, EnvClass, LicensorLexicon, NpiLexicon,
    SourceLabel,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalStats {
    pub removed: usize,
    pub total: usize,
    pub fraction: f64,
}

impl RemovalStats {
    fn new(removed: usize, total: usize) -> Self {
        let fraction = if total == 0 {
            0.0
        } else {
            removed as f64 / total as f64
        };
        Self {
            removed,
            total,
            fraction,
        }
    }
}

fn retain(
    corpus: &Corpus,
    label: SourceLabel,
    keep: impl Fn(&crate::corpus::Sentence) -> bool,
) -> (Corpus, RemovalStats) {
    let kept: Vec<_> = corpus.sentences.iter().filter(|s| keep(s)).cloned().collect();
    let stats = RemovalStats::new(corpus.len() - kept.len(), corpus.len());
    (Corpus::new(kept, label), stats)
}

/// Drops every sentence containing an NPI expression (the NO-NPI corpus).
pub fn filter_no_npi(corpus: &Corpus, lexicon: &NpiLexicon) -> (Corpus, RemovalStats) {
    retain(corpus, SourceLabel::NoNpi, |s| !contains_npi(s, lexicon).0)
}

/// Drops every sentence in which an NPI is licensed by `env` (the
/// NO-ENV(env) corpus). Sentences with the licensor but no NPI are kept.
pub fn filter_no_env(
    corpus: &Corpus,
    env: EnvClass,
    npis: &NpiLexicon,
    licensors: &LicensorLexicon,
) -> (Corpus, RemovalStats) {
    retain(corpus, SourceLabel::NoEnv(env), |s| {
        !in_licensed_environment(s, env, npis, licensors)
    })
}
