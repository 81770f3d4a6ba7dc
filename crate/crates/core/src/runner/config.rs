use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalgen::SynthConfig;
use crate::lm::{LmConfig, TrainingRegime};
use crate::probe::DcConfig;

/// Number of independently seeded models per corpus variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedCounts {
    pub full: usize,
    pub no_npi: usize,
    /// Per NO-ENV class.
    pub no_env: usize,
}

impl Default for SeedCounts {
    fn default() -> Self {
        Self {
            full: 5,
            no_npi: 5,
            no_env: 3,
        }
    }
}

/// Declarative experiment configuration, read from TOML.
///
/// The synthetic corpus seed, the DC split seed and the evaluation pair
/// seeds are all derived from `master_seed`; the `seed` fields of the
/// nested sections are ignored. Model `k` in enumeration order gets seed
/// `master_seed + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Training corpus, one sentence per line. The synthetic corpus is
    /// generated when absent.
    pub corpus: Option<PathBuf>,
    pub max_vocab: usize,
    pub pairs_per_class: usize,
    /// Train missing models instead of failing.
    pub train_on_demand: bool,
    pub seeds: SeedCounts,
    pub synth: SynthConfig,
    pub lm: LmConfig,
    pub regime: TrainingRegime,
    pub dc: DcConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            out_dir: PathBuf::from("out"),
            corpus: None,
            max_vocab: 50_000,
            pairs_per_class: 200,
            train_on_demand: true,
            seeds: SeedCounts::default(),
            synth: SynthConfig::default(),
            lm: LmConfig::default(),
            regime: TrainingRegime::default(),
            dc: DcConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.full == 0 || self.seeds.no_npi == 0 || self.seeds.no_env == 0 {
            return Err(Error::Config("seed counts must be >= 1".into()));
        }
        if self.max_vocab == 0 || self.pairs_per_class == 0 {
            return Err(Error::Config(
                "max_vocab and pairs_per_class must be >= 1".into(),
            ));
        }
        if let Some(path) = &self.corpus {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "corpus file {} does not exist",
                    path.display()
                )));
            }
        } else {
            self.synth.validate()?;
        }
        // vocab_size is filled in once the vocabulary is built.
        LmConfig {
            vocab_size: 1,
            ..self.lm.clone()
        }
        .validate()?;
        self.regime.validate()?;
        self.dc.validate()
    }
}
