use std::io::Write;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::lm::bptt::{window_eval, window_step, Batch, BatchState};
use crate::lm::{boundary_state, LmConfig, LmParameters, TrainingRegime};

/// Offset mixed into the model seed for the dropout stream, so it does not
/// replay the initialization draws.
const DROPOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Evaluation batch width for validation perplexity.
const EVAL_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_ppl: f64,
    pub valid_ppl: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedLm {
    pub params: LmParameters,
    pub log: Vec<EpochLog>,
}

impl TrainedLm {
    /// Writes the log as JSON lines.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in &self.log {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut LmParameters, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Reshapes `ids` into `batch_size` contiguous columns and cuts them into
/// windows of at most `bptt_len` steps. Each column needs one extra token
/// for the final target, so trailing tokens that do not fill a column are
/// dropped.
fn windows(ids: &[usize], batch_size: usize, bptt_len: usize) -> Vec<Batch> {
    let cols = ids.len() / batch_size;
    if cols < 2 {
        return Vec::new();
    }
    let column = |b: usize| &ids[b * cols..(b + 1) * cols];
    let mut out = Vec::new();
    let mut start = 0;
    while start + 1 < cols {
        let len = bptt_len.min(cols - 1 - start);
        let mut inputs = Vec::with_capacity(len * batch_size);
        let mut targets = Vec::with_capacity(len * batch_size);
        for t in 0..len {
            for b in 0..batch_size {
                inputs.push(column(b)[start + t]);
                targets.push(column(b)[start + t + 1]);
            }
        }
        out.push(Batch {
            inputs,
            targets,
            batch_size,
        });
        start += len;
    }
    out
}

/// Eval-mode perplexity over `ids` using batched windows with state
/// carry-over. Tokens dropped by batchification are not scored.
fn batched_perplexity(params: &LmParameters, ids: &[usize], bptt_len: usize) -> Result<f64> {
    let width = EVAL_BATCH.min(ids.len() / 2).max(1);
    let batches = windows(ids, width, bptt_len);
    if batches.is_empty() {
        return Err(Error::Empty("validation stream"));
    }
    let mut state = BatchState::zeros(params, width);
    let mut total = 0.0;
    let mut count = 0usize;
    for batch in &batches {
        let loss = window_eval(params, batch, &mut state)?;
        total += loss * batch.inputs.len() as f64;
        count += batch.inputs.len();
    }
    Ok((total / count as f64).exp())
}

/// Trains a fresh model. Deterministic in `config.seed`; returns the
/// parameters after the final epoch.
pub fn train_lm(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &LmConfig,
    regime: &TrainingRegime,
) -> Result<TrainedLm> {
    config.validate()?;
    regime.validate()?;
    if config.vocab_size != vocab.size() {
        return Err(Error::DimensionMismatch {
            expected: vocab.size(),
            actual: config.vocab_size,
        });
    }
    let ids = vocab.encode(corpus);
    let needed = regime.batch_size * regime.bptt_len;
    if ids.len() < needed {
        return Err(Error::CorpusTooSmall {
            tokens: ids.len(),
            needed,
        });
    }
    let valid_len = (ids.len() as f64 * regime.validation_fraction).ceil() as usize;
    let split = ids.len() - valid_len;
    let (train_ids, valid_ids) = ids.split_at(split);
    let train_batches = windows(train_ids, regime.batch_size, regime.bptt_len);
    if train_batches.is_empty() {
        return Err(Error::CorpusTooSmall {
            tokens: train_ids.len(),
            needed: 2 * regime.batch_size,
        });
    }
    // With no validation data the scheduler watches training perplexity.
    let valid_ids = if valid_ids.len() >= 2 { valid_ids } else { train_ids };

    let mut params = LmParameters::init(config);
    let mut grads = LmParameters::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_STREAM);
    let mut lr = regime.initial_lr;
    let mut log: Vec<EpochLog> = Vec::with_capacity(regime.epochs);

    for epoch in 1..=regime.epochs {
        let mut state = BatchState::zeros(&params, regime.batch_size);
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in &train_batches {
            let loss = window_step(&params, batch, &mut state, Some(&mut rng), &mut grads)?;
            clip_global_norm(&mut grads, regime.grad_clip_norm);
            params.sgd_step(&grads, lr);
            total += loss * batch.inputs.len() as f64;
            count += batch.inputs.len();
        }
        if !params.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        let train_ppl = (total / count as f64).exp();
        let valid_ppl = batched_perplexity(&params, valid_ids, regime.bptt_len)?;
        let entry = EpochLog {
            epoch,
            lr,
            train_ppl,
            valid_ppl,
        };
        info!(
            "seed {} epoch {epoch}: lr {lr} train ppl {train_ppl:.3} valid ppl {valid_ppl:.3}",
            config.seed
        );
        if let Some(prev) = log.last() {
            if !(valid_ppl < prev.valid_ppl) {
                lr /= regime.lr_decay_factor;
            }
        }
        log.push(entry);
    }
    let eos = vocab.eos_id();
    params.boundary_state = [valid_ids, train_ids]
        .into_iter()
        .find(|ids| ids[1..].contains(&eos))
        .map(|ids| boundary_state(&params, ids, eos))
        .transpose()?;
    Ok(TrainedLm { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;
    use crate::lm::{forward, Mode};

    #[test]
    fn windows_cover_columns_with_shifted_targets() {
        let ids: Vec<usize> = (0..23).collect();
        let batches = windows(&ids, 2, 4);
        // 11 tokens per column -> 10 predictions -> windows of 4, 4, 2.
        assert_eq!(
            batches.iter().map(Batch::seq_len).collect::<Vec<_>>(),
            vec![4, 4, 2]
        );
        assert_eq!(&batches[0].inputs[..4], &[0, 11, 1, 12]);
        assert_eq!(&batches[0].targets[..4], &[1, 12, 2, 13]);
        assert_eq!(batches[2].targets.last(), Some(&21));
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let cfg = LmConfig {
            vocab_size: 5,
            embed_dim: 3,
            hidden_dim: 3,
            ..LmConfig::default()
        };
        let mut g = LmParameters::init(&cfg);
        let before = clip_global_norm(&mut g, 0.25);
        assert!(before > 0.25);
        assert!((g.squared_norm().sqrt() - 0.25).abs() < 1e-12);
        let mut small = g.clone();
        small.scale(0.1);
        let snapshot = small.clone();
        clip_global_norm(&mut small, 0.25);
        assert_eq!(small, snapshot);
    }

    fn bigram_corpus(n: usize) -> Corpus {
        let s = Sentence::parse("a b").unwrap();
        Corpus::new(vec![s; n], crate::corpus::SourceLabel::Synth)
    }

    #[test]
    fn too_small_corpus_is_rejected() {
        let corpus = bigram_corpus(3);
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        let config = LmConfig {
            vocab_size: vocab.size(),
            ..LmConfig::default()
        };
        let err = train_lm(&corpus, &vocab, &config, &TrainingRegime::default()).unwrap_err();
        assert!(matches!(err, Error::CorpusTooSmall { .. }));
    }

    #[test]
    fn learns_bigrams_deterministically() {
        let corpus = bigram_corpus(2000);
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        let config = LmConfig {
            vocab_size: vocab.size(),
            embed_dim: 16,
            hidden_dim: 16,
            seed: 3,
            ..LmConfig::default()
        };
        let regime = TrainingRegime {
            epochs: 10,
            batch_size: 8,
            bptt_len: 10,
            ..TrainingRegime::default()
        };
        let run = train_lm(&corpus, &vocab, &config, &regime).unwrap();
        assert_eq!(run.log.len(), 10);
        let untrained = vocab.size() as f64;
        let last = run.log.last().unwrap().valid_ppl;
        assert!(last < untrained && last < 2.0, "{:?}", run.log);
        let a = vocab.id("a").unwrap();
        let b = vocab.id("b").unwrap();
        let eos = vocab.eos_id();
        let (_, dist) = forward(&run.params, &[eos, a], Mode::Eval).unwrap();
        assert!(dist[b] > 0.9, "P(b|a) = {}", dist[b]);
        let again = train_lm(&corpus, &vocab, &config, &regime).unwrap();
        assert_eq!(again.params, run.params);
        let mut buf = Vec::new();
        run.write_log(&mut buf).unwrap();
        let first: EpochLog = serde_json::from_str(
            std::str::from_utf8(&buf).unwrap().lines().next().unwrap(),
        )
        .unwrap();
        assert_eq!(first, run.log[0]);
    }
}
