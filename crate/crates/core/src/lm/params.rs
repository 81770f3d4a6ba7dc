use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lm::{HiddenState, LmConfig};

/// One LSTM layer. Gate rows are stacked in the order input, forget,
/// candidate, output: `w_ih` is `4H x in`, `w_hh` is `4H x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LstmLayer {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }
}

/// All weights of the two-layer LSTM language model. The same type holds
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LmParameters {
    pub config: LmConfig,
    /// `V x E`
    pub embedding: Array2<f64>,
    pub layers: Vec<LstmLayer>,
    /// `V x H`; row `v` is the output embedding of token `v`.
    pub decoder: Array2<f64>,
    pub decoder_bias: Array1<f64>,
    /// State every evaluation starts from. Set after training to the mean
    /// state at sentence boundaries; `None` means zeros. Not trainable.
    pub boundary_state: Option<HiddenState>,
}

pub const INIT_RANGE: f64 = 0.1;
pub const FORGET_BIAS: f64 = 1.0;

impl LmParameters {
    pub fn zeros(config: &LmConfig) -> Self {
        let v = config.vocab_size;
        let h = config.hidden_dim;
        let layers = (0..config.num_layers)
            .map(|l| LstmLayer::zeros(if l == 0 { config.embed_dim } else { h }, h))
            .collect();
        Self {
            config: config.clone(),
            embedding: Array2::zeros((v, config.embed_dim)),
            layers,
            decoder: Array2::zeros((v, h)),
            decoder_bias: Array1::zeros(v),
            boundary_state: None,
        }
    }

    /// Uniform initialization in `[-0.1, 0.1]`, plus `+1` on forget-gate
    /// biases. Deterministic in `config.seed`.
    pub fn init(config: &LmConfig) -> Self {
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for (_, tensor) in params.tensors_mut() {
            for x in tensor.iter_mut() {
                *x = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
        let h = config.hidden_dim;
        for layer in &mut params.layers {
            for b in layer.bias.slice_mut(ndarray::s![h..2 * h]).iter_mut() {
                *b += FORGET_BIAS;
            }
        }
        params
    }

    pub fn tensor_names(num_layers: usize) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for l in 0..num_layers {
            names.push(format!("layer{l}.w_ih"));
            names.push(format!("layer{l}.w_hh"));
            names.push(format!("layer{l}.bias"));
        }
        names.push("decoder".into());
        names.push("decoder_bias".into());
        names
    }

    /// Tensors in canonical order with their shapes.
    pub fn tensors(&self) -> Vec<(Vec<usize>, &[f64])> {
        let mut out: Vec<(Vec<usize>, &[f64])> = vec![(
            self.embedding.shape().to_vec(),
            self.embedding.as_slice().unwrap(),
        )];
        for layer in &self.layers {
            out.push((layer.w_ih.shape().to_vec(), layer.w_ih.as_slice().unwrap()));
            out.push((layer.w_hh.shape().to_vec(), layer.w_hh.as_slice().unwrap()));
            out.push((layer.bias.shape().to_vec(), layer.bias.as_slice().unwrap()));
        }
        out.push((self.decoder.shape().to_vec(), self.decoder.as_slice().unwrap()));
        out.push((
            self.decoder_bias.shape().to_vec(),
            self.decoder_bias.as_slice().unwrap(),
        ));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(Vec<usize>, &mut [f64])> {
        let mut out: Vec<(Vec<usize>, &mut [f64])> = Vec::new();
        let shape = self.embedding.shape().to_vec();
        out.push((shape, self.embedding.as_slice_mut().unwrap()));
        for layer in &mut self.layers {
            let s = layer.w_ih.shape().to_vec();
            out.push((s, layer.w_ih.as_slice_mut().unwrap()));
            let s = layer.w_hh.shape().to_vec();
            out.push((s, layer.w_hh.as_slice_mut().unwrap()));
            let s = layer.bias.shape().to_vec();
            out.push((s, layer.bias.as_slice_mut().unwrap()));
        }
        let s = self.decoder.shape().to_vec();
        out.push((s, self.decoder.as_slice_mut().unwrap()));
        let s = self.decoder_bias.shape().to_vec();
        out.push((s, self.decoder_bias.as_slice_mut().unwrap()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// `self -= lr * grads`
    pub fn sgd_step(&mut self, grads: &LmParameters, lr: f64) {
        for ((_, p), (_, g)) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (p, g) in p.iter_mut().zip(g) {
                *p -= lr * g;
            }
        }
    }

    pub fn fill_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
            && self.boundary_state.iter().all(|s| {
                s.layers
                    .iter()
                    .all(|(h, c)| h.iter().chain(c).all(|x| x.is_finite()))
            })
    }
}
