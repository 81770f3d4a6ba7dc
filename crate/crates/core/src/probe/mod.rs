//! Diagnostic classifiers (DCs) over pre-NPI hidden states.

mod dc;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EnvClass, Vocabulary};
use crate::error::{Error, Result};
use crate::evalgen::MinimalPair;
use crate::lm::{prenpi_hidden, LmParameters};

pub use dc::{train_dc_arrays, DcConfig, DcTrainLog, DcWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeExample {
    pub features: Array1<f64>,
    /// `true` for the DM (downward monotone) state.
    pub label: bool,
    pub env: EnvClass,
    pub pair_id: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbeDataset {
    pub examples: Vec<ProbeExample>,
}

impl ProbeDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.examples.first().map(|e| e.features.len())
    }

    pub fn classes(&self) -> Vec<EnvClass> {
        let mut seen: Vec<EnvClass> = self.examples.iter().map(|e| e.env).collect();
        seen.sort();
        seen.dedup();
        seen
    }

    /// Examples of one class only.
    pub fn restrict(&self, env: EnvClass) -> ProbeDataset {
        ProbeDataset {
            examples: self.examples.iter().filter(|e| e.env == env).cloned().collect(),
        }
    }

    fn matrix(&self, idx: &[usize]) -> Result<(Array2<f64>, Vec<bool>)> {
        let rows: Vec<&Array1<f64>> = idx.iter().map(|&i| &self.examples[i].features).collect();
        let x = dc::stack(&rows)?;
        let y = idx.iter().map(|&i| self.examples[i].label).collect();
        Ok((x, y))
    }
}

/// Two examples per pair: the DM state labelled 1 and the UM state labelled 0.
pub fn collect_dataset(
    params: &LmParameters,
    vocab: &Vocabulary,
    pairs: &[MinimalPair],
) -> Result<ProbeDataset> {
    let mut examples = Vec::with_capacity(2 * pairs.len());
    for pair in pairs {
        let (down, up) = prenpi_hidden(params, vocab, pair)?;
        for (features, label) in [(down, true), (up, false)] {
            examples.push(ProbeExample {
                features,
                label,
                env: pair.env,
                pair_id: pair.pair_id.clone(),
            });
        }
    }
    Ok(ProbeDataset { examples })
}

/// Trains a DC on the whole dataset.
pub fn train_dc(dataset: &ProbeDataset, config: &DcConfig) -> Result<(DcWeights, DcTrainLog)> {
    let idx: Vec<usize> = (0..dataset.len()).collect();
    if idx.is_empty() {
        return Err(Error::Empty("probe dataset"));
    }
    let (x, y) = dataset.matrix(&idx)?;
    train_dc_arrays(x.view(), &y, config)
}

/// Stratified fold assignment. Indices of each label are shuffled and then
/// dealt round-robin with a single running counter, so fold sizes differ by
/// at most one and so do per-fold label counts.
pub fn fold_indices(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config("folds must be >= 2".into()));
    }
    if labels.len() < folds {
        return Err(Error::Dataset(format!(
            "{} examples cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut counter = 0;
    for wanted in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == wanted).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            out[counter % folds].push(i);
            counter += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cross_validate(dataset: &ProbeDataset, config: &DcConfig) -> Result<CvResult> {
    config.validate()?;
    let labels: Vec<bool> = dataset.examples.iter().map(|e| e.label).collect();
    let folds = fold_indices(&labels, config.folds, config.seed)?;
    let mut fold_accuracies = Vec::with_capacity(folds.len());
    for (k, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let mut train = train;
        train.sort_unstable();
        let (x, y) = dataset.matrix(&train)?;
        let (dc, _) = train_dc_arrays(x.view(), &y, config)?;
        let (tx, ty) = dataset.matrix(test)?;
        fold_accuracies.push(dc.accuracy(tx.view(), &ty));
    }
    let (mean, std) = mean_std(&fold_accuracies);
    Ok(CvResult {
        fold_accuracies,
        mean,
        std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// Stratified 90/10 split over all classes.
    AllEnv,
    /// Train on every class except `excluded`, test on `excluded`.
    HeldOut(EnvClass),
}

pub const ALL_ENV_TEST_FRACTION: f64 = 0.1;

impl SplitSpec {
    pub fn name(&self) -> String {
        match self {
            SplitSpec::AllEnv => "ALL-ENV".into(),
            SplitSpec::HeldOut(env) => env.name().into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub spec: SplitSpec,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, f64>,
    pub weights: DcWeights,
    pub train_size: usize,
    pub test_size: usize,
}

/// Evaluation report in its JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, f64>,
    pub folds: Vec<f64>,
}

impl SplitResult {
    pub fn report(&self, cv: Option<&CvResult>) -> EvalReport {
        EvalReport {
            split: self.spec.name(),
            accuracy: self.accuracy,
            per_class: self.per_class.clone(),
            folds: cv.map(|c| c.fold_accuracies.clone()).unwrap_or_default(),
        }
    }
}

/// Train/test indices for a split. ALL-ENV takes a 10% test share from each
/// (class, label) stratum, rounded to nearest with at least one test example
/// for strata of size >= 2.
pub fn split_indices(dataset: &ProbeDataset, spec: SplitSpec, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    match spec {
        SplitSpec::AllEnv => {
            let mut strata: BTreeMap<(EnvClass, bool), Vec<usize>> = BTreeMap::new();
            for (i, e) in dataset.examples.iter().enumerate() {
                strata.entry((e.env, e.label)).or_default().push(i);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (_, mut idx) in strata {
                idx.shuffle(&mut rng);
                let mut k = (idx.len() as f64 * ALL_ENV_TEST_FRACTION).round() as usize;
                if k == 0 && idx.len() >= 2 {
                    k = 1;
                }
                test.extend_from_slice(&idx[..k]);
                train.extend_from_slice(&idx[k..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok((train, test))
        }
        SplitSpec::HeldOut(excluded) => {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| dataset.examples[i].env == excluded);
            if test.is_empty() {
                return Err(Error::Dataset(format!("class {excluded} absent from dataset")));
            }
            if train.is_empty() {
                return Err(Error::Dataset("held-out split needs at least two classes".into()));
            }
            Ok((train, test))
        }
    }
}

pub fn evaluate_split(dataset: &ProbeDataset, spec: SplitSpec, config: &DcConfig) -> Result<SplitResult> {
    config.validate()?;
    let (train, test) = split_indices(dataset, spec, config.seed)?;
    if test.is_empty() {
        return Err(Error::Dataset("split produced an empty test set".into()));
    }
    let (x, y) = dataset.matrix(&train)?;
    let (weights, _) = train_dc_arrays(x.view(), &y, config)?;
    let (tx, ty) = dataset.matrix(&test)?;
    let accuracy = weights.accuracy(tx.view(), &ty);
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (row, &i) in tx.rows().into_iter().zip(&test) {
        let e = &dataset.examples[i];
        let slot = hits.entry(e.env.name().to_string()).or_default();
        slot.0 += usize::from(weights.predict(row) == e.label);
        slot.1 += 1;
    }
    let per_class = hits
        .into_iter()
        .map(|(k, (h, n))| (k, h as f64 / n as f64))
        .collect();
    Ok(SplitResult {
        spec,
        accuracy,
        per_class,
        weights,
        train_size: train.len(),
        test_size: test.len(),
    })
}
