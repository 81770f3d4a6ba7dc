//! Experiment orchestration: corpus variants, seeded model training with
//! checkpoint reuse, the five experiments, and report emission.

mod config;
mod records;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    filter_no_env, filter_no_npi, Corpus, EnvClass, LicensorLexicon, NpiLexicon, SourceLabel,
    Vocabulary,
};
use crate::error::{Error, Result};
use crate::evalgen::{generate_pairs_with, generate_synth_corpus, write_pairs, MinimalPair, SynthConfig};
use crate::lm::{
    encode_context, load_checkpoint, save_checkpoint, token_conditional_prob, train_lm, LmConfig,
    LmParameters,
};
use crate::probe::{collect_dataset, evaluate_split, DcConfig, ProbeDataset, SplitSpec};
use crate::ranking::{median_npi_rank, rank_tokens, NpiTokenSet};

pub use config::{ExperimentConfig, SeedCounts};
pub use records::{
    emit_report, grid_columns, grid_csv, load_records, with_aggregates, Metric, ResultRecord,
    ALL_ENV, GRID_FILE, RECORDS_FILE,
};

/// Offsets that separate the derived seed streams from model seeds.
const SYNTH_STREAM: u64 = 1 << 40;
const PAIRS_STREAM: u64 = 2 << 40;
const DC_STREAM: u64 = 3 << 40;

pub const THREADS_ENV: &str = "MONOPROBE_THREADS";

/// Parallel model runs allowed: `MONOPROBE_THREADS` if set, otherwise the
/// available parallelism.
pub fn thread_budget() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptabilityResult {
    pub accuracy: f64,
    pub per_class: BTreeMap<String, f64>,
    pub per_class_counts: BTreeMap<String, usize>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// True when every prefix and NPI token of the pair is in the vocabulary.
pub fn pair_is_encodable(vocab: &Vocabulary, pair: &MinimalPair) -> bool {
    let um = pair.um_prefix().unwrap_or(&[]);
    pair.dm_prefix()
        .iter()
        .chain(um)
        .chain(&pair.npi)
        .all(|t| vocab.contains(t))
}

/// Share of pairs with `P(npi | dm_prefix) > P(npi | um_prefix)`. Ties are
/// failures; pairs with out-of-vocabulary tokens are skipped and counted.
pub fn npi_acceptability(
    params: &LmParameters,
    vocab: &Vocabulary,
    pairs: &[MinimalPair],
) -> Result<AcceptabilityResult> {
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut skipped = 0;
    for pair in pairs {
        if !pair_is_encodable(vocab, pair) {
            warn!("skipping pair {}: token out of vocabulary", pair.pair_id);
            skipped += 1;
            continue;
        }
        let um = pair
            .um_prefix()
            .ok_or_else(|| Error::Dataset(format!("pair {} has no UM prefix", pair.pair_id)))?;
        let npi = encode_context(vocab, &pair.npi)?;
        let npi = &npi[1..];
        let p_dm = token_conditional_prob(params, &encode_context(vocab, pair.dm_prefix())?, npi)?;
        let p_um = token_conditional_prob(params, &encode_context(vocab, um)?, npi)?;
        let slot = hits.entry(pair.env.name().to_string()).or_default();
        slot.0 += usize::from(p_dm > p_um);
        slot.1 += 1;
    }
    let evaluated: usize = hits.values().map(|h| h.1).sum();
    if evaluated == 0 {
        return Err(Error::Dataset("no pair could be evaluated".into()));
    }
    let correct: usize = hits.values().map(|h| h.0).sum();
    Ok(AcceptabilityResult {
        accuracy: correct as f64 / evaluated as f64,
        per_class: hits
            .iter()
            .map(|(k, (h, n))| (k.clone(), *h as f64 / *n as f64))
            .collect(),
        per_class_counts: hits.iter().map(|(k, (_, n))| (k.clone(), *n)).collect(),
        evaluated,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    NoNpi,
    NoEnv(EnvClass),
}

impl Variant {
    pub fn label(&self) -> String {
        self.source_label().to_string()
    }

    pub fn source_label(&self) -> SourceLabel {
        match self {
            Variant::Full => SourceLabel::Full,
            Variant::NoNpi => SourceLabel::NoNpi,
            Variant::NoEnv(env) => SourceLabel::NoEnv(*env),
        }
    }

    fn dir_name(&self) -> String {
        match self {
            Variant::Full => "full".into(),
            Variant::NoNpi => "no-npi".into(),
            Variant::NoEnv(env) => format!("no-env-{}", env.name().to_lowercase()),
        }
    }
}

/// One model to train: `index` is its position in the global enumeration
/// and `seed = master_seed + index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub replicate: usize,
    pub index: usize,
    pub seed: u64,
}

const MODEL_FORMAT: u32 = 2;

/// Fingerprint stored next to a checkpoint so stale models are retrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    format: u32,
    variant: String,
    seed: u64,
    lm: LmConfig,
    regime: crate::lm::TrainingRegime,
    corpus_sentences: usize,
    corpus_tokens: usize,
    corpus_hash: String,
}

fn fnv1a(corpus: &Corpus) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in &corpus.sentences {
        for byte in s.to_string().bytes().chain(std::iter::once(b'\n')) {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

pub struct Runner {
    pub config: ExperimentConfig,
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    /// Evaluation pairs of all classes, in class order.
    pub pairs: Vec<MinimalPair>,
    npis: NpiLexicon,
    licensors: LicensorLexicon,
}

impl Runner {
    /// Loads or generates the corpus, builds the shared vocabulary and the
    /// evaluation pairs, and writes them under `out_dir/data`.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let corpus = match &config.corpus {
            Some(path) => Corpus::read(path, SourceLabel::Full)?,
            None => generate_synth_corpus(&SynthConfig {
                seed: config.master_seed.wrapping_add(SYNTH_STREAM),
                ..config.synth.clone()
            })?,
        };
        let vocab = Vocabulary::build(&corpus, config.max_vocab)?;
        let mut pairs = Vec::new();
        for env in EnvClass::ALL {
            let seed = config
                .master_seed
                .wrapping_add(PAIRS_STREAM + env.index() as u64);
            pairs.extend(generate_pairs_with(
                env,
                config.pairs_per_class,
                seed,
                &config.synth.words,
            )?);
        }
        let data = config.out_dir.join("data");
        fs::create_dir_all(&data).map_err(|e| Error::io(&data, e))?;
        vocab.save(data.join("vocab.txt"))?;
        write_pairs(&pairs, data.join("pairs.tsv"))?;
        info!(
            "corpus: {} sentences, {} tokens, vocabulary {}",
            corpus.len(),
            corpus.num_tokens(),
            vocab.size()
        );
        Ok(Self {
            config,
            corpus,
            vocab,
            pairs,
            npis: NpiLexicon::default(),
            licensors: LicensorLexicon::default(),
        })
    }

    pub fn dc_config(&self) -> DcConfig {
        DcConfig {
            seed: self.config.master_seed.wrapping_add(DC_STREAM),
            ..self.config.dc.clone()
        }
    }

    pub fn variants() -> Vec<Variant> {
        let mut out = vec![Variant::Full, Variant::NoNpi];
        out.extend(EnvClass::ALL.iter().map(|&e| Variant::NoEnv(e)));
        out
    }

    fn replicates(&self, variant: Variant) -> usize {
        match variant {
            Variant::Full => self.config.seeds.full,
            Variant::NoNpi => self.config.seeds.no_npi,
            Variant::NoEnv(_) => self.config.seeds.no_env,
        }
    }

    /// Every model of every variant, in enumeration order.
    pub fn all_models(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for variant in Self::variants() {
            for replicate in 0..self.replicates(variant) {
                let index = out.len();
                out.push(ModelSpec {
                    variant,
                    replicate,
                    index,
                    seed: self.config.master_seed.wrapping_add(index as u64),
                });
            }
        }
        out
    }

    pub fn models(&self, variant: Variant) -> Vec<ModelSpec> {
        self.all_models()
            .into_iter()
            .filter(|m| m.variant == variant)
            .collect()
    }

    pub fn variant_corpus(&self, variant: Variant) -> Corpus {
        match variant {
            Variant::Full => self.corpus.clone(),
            Variant::NoNpi => filter_no_npi(&self.corpus, &self.npis).0,
            Variant::NoEnv(env) => filter_no_env(&self.corpus, env, &self.npis, &self.licensors).0,
        }
    }

    pub fn model_dir(&self, spec: &ModelSpec) -> PathBuf {
        self.config
            .out_dir
            .join("models")
            .join(spec.variant.dir_name())
            .join(format!("seed{}", spec.replicate))
    }

    pub fn checkpoint_path(&self, spec: &ModelSpec) -> PathBuf {
        self.model_dir(spec).join("model.ckpt")
    }

    fn lm_config(&self, seed: u64) -> LmConfig {
        LmConfig {
            vocab_size: self.vocab.size(),
            seed,
            ..self.config.lm.clone()
        }
    }

    fn meta(&self, spec: &ModelSpec, corpus: &Corpus) -> ModelMeta {
        ModelMeta {
            format: MODEL_FORMAT,
            variant: spec.variant.label(),
            seed: spec.seed,
            lm: self.lm_config(spec.seed),
            regime: self.config.regime.clone(),
            corpus_sentences: corpus.len(),
            corpus_tokens: corpus.num_tokens(),
            corpus_hash: fnv1a(corpus),
        }
    }

    fn is_current(&self, spec: &ModelSpec) -> bool {
        let dir = self.model_dir(spec);
        if !dir.join("model.ckpt").exists() {
            return false;
        }
        let Ok(text) = fs::read_to_string(dir.join("meta.json")) else {
            return false;
        };
        let Ok(stored) = serde_json::from_str::<ModelMeta>(&text) else {
            return false;
        };
        stored == self.meta(spec, &self.variant_corpus(spec.variant))
    }

    fn train_one(&self, spec: &ModelSpec) -> Result<()> {
        let corpus = self.variant_corpus(spec.variant);
        info!(
            "training {} seed {} ({} sentences)",
            spec.variant.label(),
            spec.seed,
            corpus.len()
        );
        let run = train_lm(
            &corpus,
            &self.vocab,
            &self.lm_config(spec.seed),
            &self.config.regime,
        )?;
        let dir = self.model_dir(spec);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tmp = dir.join("model.ckpt.tmp");
        save_checkpoint(&run.params, &tmp)?;
        let log_path = dir.join("train_log.jsonl");
        let mut log = Vec::new();
        run.write_log(&mut log).map_err(|e| Error::io(&log_path, e))?;
        fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
        let meta = serde_json::to_string_pretty(&self.meta(spec, &corpus))
            .map_err(|e| Error::Serde(e.to_string()))?;
        let meta_path = dir.join("meta.json");
        fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
        let ckpt = self.checkpoint_path(spec);
        fs::rename(&tmp, &ckpt).map_err(|e| Error::io(&ckpt, e))
    }

    /// Trains every listed model whose checkpoint is missing or stale, up
    /// to `thread_budget()` at a time.
    pub fn ensure_models(&self, specs: &[ModelSpec]) -> Result<()> {
        let pending: Vec<&ModelSpec> = specs.iter().filter(|s| !self.is_current(s)).collect();
        if pending.is_empty() {
            return Ok(());
        }
        if !self.config.train_on_demand {
            return Err(Error::Checkpoint(format!(
                "missing checkpoint {} and train_on_demand is off",
                self.checkpoint_path(pending[0]).display()
            )));
        }
        let next = AtomicUsize::new(0);
        let failures = Mutex::new(Vec::new());
        let workers = thread_budget().min(pending.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(spec) = pending.get(i) else { break };
                    if let Err(e) = self.train_one(spec) {
                        failures.lock().unwrap().push((spec.index, e));
                    }
                });
            }
        });
        let mut failures = failures.into_inner().unwrap();
        failures.sort_by_key(|(i, _)| *i);
        match failures.into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }

    pub fn load_model(&self, spec: &ModelSpec) -> Result<LmParameters> {
        load_checkpoint(self.checkpoint_path(spec))
    }

    fn encodable_pairs(&self, env: Option<EnvClass>) -> (Vec<MinimalPair>, usize) {
        let selected: Vec<&MinimalPair> = self
            .pairs
            .iter()
            .filter(|p| env.map_or(true, |e| p.env == e))
            .collect();
        let ok: Vec<MinimalPair> = selected
            .iter()
            .filter(|p| pair_is_encodable(&self.vocab, p))
            .map(|p| (*p).clone())
            .collect();
        let skipped = selected.len() - ok.len();
        if skipped > 0 {
            warn!("{skipped} pairs skipped: tokens out of vocabulary");
        }
        (ok, skipped)
    }

    fn dataset(&self, params: &LmParameters, env: Option<EnvClass>) -> Result<(ProbeDataset, usize)> {
        let (pairs, skipped) = self.encodable_pairs(env);
        Ok((collect_dataset(params, &self.vocab, &pairs)?, skipped))
    }

    fn record(
        experiment: &str,
        spec: &ModelSpec,
        env_class: &str,
        metric: Metric,
        value: f64,
        n: usize,
        skipped: usize,
    ) -> ResultRecord {
        ResultRecord {
            experiment: experiment.into(),
            variant: spec.variant.label(),
            seed: Some(spec.seed),
            env_class: env_class.into(),
            metric,
            value,
            std: None,
            n,
            skipped,
        }
    }

    /// ALL-ENV plus nine held-out DC accuracies per model of `variant`.
    fn probing(&self, experiment: &str, variant: Variant) -> Result<Vec<ResultRecord>> {
        let specs = self.models(variant);
        self.ensure_models(&specs)?;
        let dc = self.dc_config();
        let mut out = Vec::new();
        for spec in &specs {
            let params = self.load_model(spec)?;
            let (data, skipped) = self.dataset(&params, None)?;
            let mut splits = vec![SplitSpec::AllEnv];
            splits.extend(EnvClass::ALL.iter().map(|&e| SplitSpec::HeldOut(e)));
            for split in splits {
                let res = evaluate_split(&data, split, &dc)?;
                out.push(Self::record(
                    experiment,
                    spec,
                    &split.name(),
                    Metric::DcAccuracy,
                    res.accuracy,
                    res.test_size,
                    skipped,
                ));
            }
        }
        Ok(out)
    }

    pub fn run_exp1(&self) -> Result<Vec<ResultRecord>> {
        self.probing("exp1", Variant::Full)
    }

    /// Overall and per-class NPI acceptability of the FULL models.
    pub fn run_exp2(&self) -> Result<Vec<ResultRecord>> {
        let specs = self.models(Variant::Full);
        self.ensure_models(&specs)?;
        let mut out = Vec::new();
        for spec in &specs {
            let params = self.load_model(spec)?;
            let res = npi_acceptability(&params, &self.vocab, &self.pairs)?;
            out.push(Self::record(
                "exp2",
                spec,
                ALL_ENV,
                Metric::NpiAcceptability,
                res.accuracy,
                res.evaluated,
                res.skipped,
            ));
            for env in EnvClass::ALL {
                if let Some(&acc) = res.per_class.get(env.name()) {
                    out.push(Self::record(
                        "exp2",
                        spec,
                        env.name(),
                        Metric::NpiAcceptability,
                        acc,
                        res.per_class_counts[env.name()],
                        0,
                    ));
                }
            }
        }
        Ok(out)
    }

    fn median_rank_for(&self, params: &LmParameters, data: &ProbeDataset) -> Result<f64> {
        let res = evaluate_split(data, SplitSpec::AllEnv, &self.dc_config())?;
        match rank_tokens(&res.weights, params.decoder.view()) {
            Ok(ranking) => median_npi_rank(&ranking, &NpiTokenSet::default_for(&self.vocab)),
            // An all-zero DC carries no direction; its NPI rank is at chance.
            Err(Error::ZeroVector) => {
                warn!("DC weights are all zero; median rank set to chance level");
                Ok((self.vocab.size() - 1) as f64 / 2.0)
            }
            Err(e) => Err(e),
        }
    }

    /// Median NPI rank of the ALL-ENV DC and of nine per-class DCs.
    pub fn run_exp3(&self) -> Result<Vec<ResultRecord>> {
        let specs = self.models(Variant::Full);
        self.ensure_models(&specs)?;
        let mut out = Vec::new();
        for spec in &specs {
            let params = self.load_model(spec)?;
            let (data, skipped) = self.dataset(&params, None)?;
            let rank = self.median_rank_for(&params, &data)?;
            out.push(Self::record("exp3", spec, ALL_ENV, Metric::MedianRank, rank, data.len(), skipped));
            for env in EnvClass::ALL {
                let subset = data.restrict(env);
                let rank = self.median_rank_for(&params, &subset)?;
                out.push(Self::record(
                    "exp3",
                    spec,
                    env.name(),
                    Metric::MedianRank,
                    rank,
                    subset.len(),
                    0,
                ));
            }
        }
        Ok(out)
    }

    pub fn run_exp4(&self) -> Result<Vec<ResultRecord>> {
        self.probing("exp4", Variant::NoNpi)
    }

    /// For each class, NO-ENV(class) models: acceptability (exp5a) and the
    /// per-class DC median rank (exp5b), both on the held-out class.
    pub fn run_exp5(&self) -> Result<Vec<ResultRecord>> {
        let specs: Vec<ModelSpec> = EnvClass::ALL
            .iter()
            .flat_map(|&e| self.models(Variant::NoEnv(e)))
            .collect();
        self.ensure_models(&specs)?;
        let (mut accept, mut ranks) = (Vec::new(), Vec::new());
        for spec in &specs {
            let Variant::NoEnv(env) = spec.variant else {
                unreachable!()
            };
            let params = self.load_model(spec)?;
            let (pairs, skipped) = self.encodable_pairs(Some(env));
            let res = npi_acceptability(&params, &self.vocab, &pairs)?;
            accept.push(Self::record(
                "exp5a",
                spec,
                env.name(),
                Metric::NpiAcceptability,
                res.accuracy,
                res.evaluated,
                skipped,
            ));
            let data = collect_dataset(&params, &self.vocab, &pairs)?;
            let rank = self.median_rank_for(&params, &data)?;
            ranks.push(Self::record(
                "exp5b",
                spec,
                env.name(),
                Metric::MedianRank,
                rank,
                data.len(),
                skipped,
            ));
        }
        accept.extend(ranks);
        Ok(accept)
    }

    /// Trains everything up front (maximal parallelism), then runs the five
    /// experiments and appends aggregates.
    pub fn run_all(&self) -> Result<Vec<ResultRecord>> {
        self.ensure_models(&self.all_models())?;
        let mut records = self.run_exp1()?;
        records.extend(self.run_exp2()?);
        records.extend(self.run_exp3()?);
        records.extend(self.run_exp4()?);
        records.extend(self.run_exp5()?);
        Ok(with_aggregates(records))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.config.out_dir.join("reports")
    }
}

/// Runs the whole pipeline and writes the report into `out_dir/reports`.
pub fn run_pipeline(config: ExperimentConfig) -> Result<(Vec<ResultRecord>, PathBuf)> {
    let runner = Runner::new(config)?;
    let records = runner.run_all()?;
    let dir = runner.reports_dir();
    emit_report(&records, &dir)?;
    Ok((records, dir))
}

/// Convenience for callers holding a report directory.
pub fn records_path(dir: &Path) -> PathBuf {
    dir.join(RECORDS_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn pair(dm: &str, um: &str, npi_index: usize, env: EnvClass) -> MinimalPair {
        let dm_full = Sentence::parse(dm).unwrap();
        MinimalPair {
            pair_id: "t".into(),
            env,
            npi: vec![dm_full.tokens()[npi_index].clone()],
            um_full: Sentence::parse(um).unwrap(),
            dm_full,
            npi_index_dm: npi_index,
        }
    }

    fn tiny_model(vocab: &Vocabulary) -> LmParameters {
        LmParameters::init(&LmConfig {
            vocab_size: vocab.size(),
            embed_dim: 4,
            hidden_dim: 4,
            seed: 1,
            ..LmConfig::default()
        })
    }

    #[test]
    fn ties_are_failures_and_oov_is_skipped() {
        let vocab = Vocabulary::from_tokens(
            ["the", "boy", "did", "ever", "leave", "?", "."].map(String::from),
        );
        let params = tiny_model(&vocab);
        let same = pair("the boy did ever leave .", "the boy did ever leave .", 3, EnvClass::Adv);
        let res = npi_acceptability(&params, &vocab, &[same.clone()]).unwrap();
        assert_eq!(res.accuracy, 0.0);
        let oov = pair("the girl did ever leave .", "the boy did ever leave .", 3, EnvClass::Adv);
        let res = npi_acceptability(&params, &vocab, &[same, oov]).unwrap();
        assert_eq!((res.evaluated, res.skipped), (1, 1));
    }

    #[test]
    fn acceptability_compares_conditional_probabilities() {
        let vocab = Vocabulary::from_tokens(
            ["did", "the", "boy", "ever", "leave", "?", "."].map(String::from),
        );
        let params = tiny_model(&vocab);
        let p = pair("did the boy ever leave ?", "the boy did ever leave .", 3, EnvClass::SmpQ);
        let ids = |toks: &[&str]| {
            encode_context(&vocab, &toks.iter().map(|t| t.to_string()).collect::<Vec<_>>()).unwrap()
        };
        let ever = [vocab.id("ever").unwrap()];
        let p_dm = token_conditional_prob(&params, &ids(&["did", "the", "boy"]), &ever).unwrap();
        let p_um = token_conditional_prob(&params, &ids(&["the", "boy", "did"]), &ever).unwrap();
        let res = npi_acceptability(&params, &vocab, &[p]).unwrap();
        assert_eq!(res.accuracy, if p_dm > p_um { 1.0 } else { 0.0 });
        assert_eq!(res.per_class.keys().collect::<Vec<_>>(), vec!["SMP-Q"]);
    }

    #[test]
    fn model_enumeration_and_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            master_seed: 100,
            out_dir: dir.path().to_path_buf(),
            pairs_per_class: 3,
            seeds: SeedCounts { full: 2, no_npi: 1, no_env: 2 },
            synth: SynthConfig {
                num_sentences: 300,
                ..SynthConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let runner = Runner::new(config).unwrap();
        let models = runner.all_models();
        assert_eq!(models.len(), 2 + 1 + 9 * 2);
        assert!(models.iter().enumerate().all(|(i, m)| m.index == i && m.seed == 100 + i as u64));
        assert_eq!(runner.pairs.len(), 27);
        assert!(dir.path().join("data/pairs.tsv").exists());
        let full = runner.variant_corpus(Variant::Full);
        let no_npi = runner.variant_corpus(Variant::NoNpi);
        for env in EnvClass::ALL {
            let no_env = runner.variant_corpus(Variant::NoEnv(env));
            assert!(no_env.len() <= full.len());
            assert!(no_npi.sentences.iter().all(|s| no_env.sentences.contains(s)));
        }
    }

    #[test]
    fn missing_checkpoints_without_training_fail() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            out_dir: dir.path().to_path_buf(),
            pairs_per_class: 2,
            train_on_demand: false,
            seeds: SeedCounts { full: 1, no_npi: 1, no_env: 1 },
            synth: SynthConfig {
                num_sentences: 200,
                ..SynthConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let runner = Runner::new(config).unwrap();
        assert!(matches!(runner.run_exp1(), Err(Error::Checkpoint(_))));
    }
}
