//! Two-layer LSTM language model in 64-bit floating point.
//!
//! Training follows the usual word-level recipe: the corpus is one
//! contiguous `<eos>`-joined stream, reshaped into `batch_size` columns and
//! cut into truncated-BPTT windows whose recurrent state carries over.
//! Plain SGD with global-norm gradient clipping and a plateau scheduler.

mod bptt;
mod checkpoint;
mod infer;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bptt::{gradients, window_eval, window_loss, window_step, Batch, BatchState, WindowOutput};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use infer::{
    boundary_state, decode_hidden, encode_context, forward, perplexity, prenpi_hidden, softmax, stream_perplexity, token_conditional_prob,
    HiddenState, LstmState, Mode,
};
pub(crate) use infer::sigmoid;
pub use params::{LmParameters, LstmLayer, FORGET_BIAS, INIT_RANGE};
pub use train::{clip_global_norm, train_lm, EpochLog, TrainedLm};

pub const NUM_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            embed_dim: 64,
            hidden_dim: 64,
            num_layers: NUM_LAYERS,
            dropout_rate: 0.1,
            seed: 0,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("LM dimensions must be >= 1".into()));
        }
        if self.num_layers != NUM_LAYERS {
            return Err(Error::Config(format!(
                "num_layers is fixed at {NUM_LAYERS}, got {}",
                self.num_layers
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingRegime {
    pub epochs: usize,
    pub initial_lr: f64,
    /// Learning rate is divided by this when validation perplexity does not
    /// improve on the previous epoch.
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub bptt_len: usize,
    pub grad_clip_norm: f64,
    pub validation_fraction: f64,
}

impl Default for TrainingRegime {
    fn default() -> Self {
        Self {
            epochs: 40,
            initial_lr: 20.0,
            lr_decay_factor: 4.0,
            batch_size: 64,
            bptt_len: 35,
            grad_clip_norm: 0.25,
            validation_fraction: 0.05,
        }
    }
}

impl TrainingRegime {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.bptt_len == 0 {
            return Err(Error::Config(
                "epochs, batch_size and bptt_len must be >= 1".into(),
            ));
        }
        if !(self.initial_lr > 0.0) || !(self.grad_clip_norm > 0.0) {
            return Err(Error::Config(
                "initial_lr and grad_clip_norm must be positive".into(),
            ));
        }
        if !(self.lr_decay_factor >= 1.0) {
            return Err(Error::Config("lr_decay_factor must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = LmConfig {
            vocab_size: 10,
            ..LmConfig::default()
        };
        assert!(ok.validate().is_ok());
        for bad in [
            LmConfig { vocab_size: 0, ..ok.clone() },
            LmConfig { hidden_dim: 0, ..ok.clone() },
            LmConfig { num_layers: 3, ..ok.clone() },
            LmConfig { dropout_rate: 1.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(TrainingRegime::default().validate().is_ok());
        let bad = TrainingRegime {
            initial_lr: 0.0,
            ..TrainingRegime::default()
        };
        assert!(bad.validate().is_err());
    }
}
