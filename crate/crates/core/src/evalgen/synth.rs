use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EnvClass, Sentence, SourceLabel};
use crate::error::{Error, Result};
use crate::evalgen::templates::{frames_for, WordLists};

/// Settings for the synthetic training corpus.
///
/// Each sentence instantiates a frame of one environment class. With
/// probability `npi_fraction` it is the DM version with its NPI; otherwise
/// it is NPI-free, DM with probability `dm_share` and UM otherwise. NPIs
/// therefore only ever occur downstream of a DM licensor. DM sentences carry
/// the clause-final `dm_marker` with probability `marker_rate`, a
/// monotonicity-sensitive item that is not an NPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_sentences: usize,
    pub npi_fraction: f64,
    pub dm_share: f64,
    pub dm_marker: String,
    pub marker_rate: f64,
    /// Mixture weights in `EnvClass::ALL` order; must sum to 1.
    pub class_weights: Vec<f64>,
    pub seed: u64,
    pub words: WordLists,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_sentences: 50_000,
            npi_fraction: 0.2,
            dm_share: 0.5,
            dm_marker: "either".into(),
            marker_rate: 0.3,
            class_weights: vec![1.0 / 9.0; 9],
            seed: 0,
            words: WordLists::default(),
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in [0, 1], got {p}")))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sentences == 0 {
            return Err(Error::Config("num_sentences must be >= 1".into()));
        }
        check_probability("npi_fraction", self.npi_fraction)?;
        check_probability("dm_share", self.dm_share)?;
        check_probability("marker_rate", self.marker_rate)?;
        if self.class_weights.len() != EnvClass::ALL.len() {
            return Err(Error::Config(format!(
                "class_weights needs {} entries, got {}",
                EnvClass::ALL.len(),
                self.class_weights.len()
            )));
        }
        if self.class_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("class_weights must be non-negative".into()));
        }
        let total: f64 = self.class_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "class_weights must sum to 1, got {total}"
            )));
        }
        if self.marker_rate > 0.0
            && (self.dm_marker.is_empty() || self.dm_marker.chars().any(char::is_whitespace))
        {
            return Err(Error::Config("dm_marker must be a single token".into()));
        }
        self.words.validate().map_err(Error::Config)
    }

    fn sample_class<R: Rng>(&self, rng: &mut R) -> EnvClass {
        let mut u: f64 = rng.gen();
        for (env, w) in EnvClass::ALL.iter().zip(&self.class_weights) {
            if u < *w {
                return *env;
            }
            u -= w;
        }
        // Rounding can leave u marginally above the last cumulative weight.
        *EnvClass::ALL
            .iter()
            .zip(&self.class_weights)
            .rev()
            .find(|(_, w)| **w > 0.0)
            .unwrap()
            .0
    }
}

/// Generates the synthetic corpus, deterministic in `config.seed`.
pub fn generate_synth_corpus(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let frames: Vec<Vec<_>> = EnvClass::ALL
        .iter()
        .map(|&env| frames_for(env).collect())
        .collect();
    let mut sentences = Vec::with_capacity(config.num_sentences);
    for _ in 0..config.num_sentences {
        let env = config.sample_class(&mut rng);
        let frame = frames[env.index()].choose(&mut rng).unwrap();
        let inst = frame.instantiate(&config.words, &mut rng);
        let with_npi = rng.gen_bool(config.npi_fraction);
        let dm = with_npi || rng.gen_bool(config.dm_share);
        let marker = (dm && rng.gen_bool(config.marker_rate)).then_some(config.dm_marker.as_str());
        let tokens = match (with_npi, dm) {
            (true, _) => inst.dm_with_npi(marker),
            (false, true) => inst.dm_plain(marker),
            (false, false) => inst.um_plain(),
        };
        sentences.push(Sentence::new(tokens)?);
    }
    Ok(Corpus::new(sentences, SourceLabel::Synth))
}
