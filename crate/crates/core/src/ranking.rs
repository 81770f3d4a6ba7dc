//! Ranks the vocabulary by cosine similarity between a DC weight vector and
//! each decoder row.

use std::collections::BTreeMap;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::probe::DcWeights;

/// Single-token NPIs considered for the median rank.
pub const DEFAULT_NPI_TOKENS: [&str; 11] = [
    "dared",
    "any",
    "anybody",
    "anymore",
    "anyone",
    "anything",
    "anywhere",
    "ever",
    "nor",
    "whatsoever",
    "yet",
];

pub fn cosine_similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenRanking {
    /// Token ids from most to least similar.
    pub order: Vec<usize>,
    /// Cosine similarity per token id; `-inf` for zero decoder rows.
    pub similarity: Vec<f64>,
    /// 0-based rank per token id.
    pub rank_of: Vec<usize>,
}

/// Sorts decoder rows by descending cosine similarity to `dc.w`, ties by
/// ascending token id. The DC bias plays no part.
pub fn rank_tokens(dc: &DcWeights, decoder: ArrayView2<f64>) -> Result<TokenRanking> {
    if decoder.ncols() != dc.w.len() {
        return Err(Error::DimensionMismatch {
            expected: dc.w.len(),
            actual: decoder.ncols(),
        });
    }
    if dc.w.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let similarity: Vec<f64> = decoder
        .rows()
        .into_iter()
        .map(|row| match cosine_similarity(dc.w.view(), row) {
            Ok(c) => Ok(c),
            Err(Error::ZeroVector) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..similarity.len()).collect();
    order.sort_by(|&a, &b| similarity[b].total_cmp(&similarity[a]).then(a.cmp(&b)));
    let mut rank_of = vec![0; order.len()];
    for (rank, &id) in order.iter().enumerate() {
        rank_of[id] = rank;
    }
    Ok(TokenRanking {
        order,
        similarity,
        rank_of,
    })
}

/// Token ids of the single-token NPIs present in a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpiTokenSet {
    pub ids: Vec<usize>,
}

impl NpiTokenSet {
    pub fn from_tokens<'a>(vocab: &Vocabulary, tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut ids: Vec<usize> = tokens.into_iter().filter_map(|t| vocab.id(t)).collect();
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    pub fn default_for(vocab: &Vocabulary) -> Self {
        Self::from_tokens(vocab, DEFAULT_NPI_TOKENS)
    }
}

pub fn median(values: &mut [f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median input"));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

pub fn median_npi_rank(ranking: &TokenRanking, npis: &NpiTokenSet) -> Result<f64> {
    if npis.ids.is_empty() {
        return Err(Error::Empty("NPI token set"));
    }
    let mut ranks = Vec::with_capacity(npis.ids.len());
    for &id in &npis.ids {
        let rank = *ranking.rank_of.get(id).ok_or(Error::TokenOutOfRange {
            id,
            vocab_size: ranking.rank_of.len(),
        })?;
        ranks.push(rank as f64);
    }
    median(&mut ranks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopToken {
    pub token: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub dc_id: String,
    pub vocab_size: usize,
    pub npi_ranks: BTreeMap<String, usize>,
    pub median_rank: f64,
    pub top_k: Vec<TopToken>,
}

pub const REPORT_TOP_K: usize = 50;

pub fn ranking_report(
    dc_id: &str,
    ranking: &TokenRanking,
    vocab: &Vocabulary,
    npis: &NpiTokenSet,
) -> Result<RankingReport> {
    let median_rank = median_npi_rank(ranking, npis)?;
    let npi_ranks = npis
        .ids
        .iter()
        .map(|&id| (vocab.token(id).unwrap_or("").to_string(), ranking.rank_of[id]))
        .collect();
    let top_k = ranking
        .order
        .iter()
        .take(REPORT_TOP_K)
        .map(|&id| TopToken {
            token: vocab.token(id).unwrap_or("").to_string(),
            similarity: ranking.similarity[id],
        })
        .collect();
    Ok(RankingReport {
        dc_id: dc_id.to_string(),
        vocab_size: ranking.order.len(),
        npi_ranks,
        median_rank,
        top_k,
    })
}
