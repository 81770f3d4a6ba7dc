use ndarray::linalg::general_mat_vec_mul;
use ndarray::{s, Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::evalgen::MinimalPair;
use crate::lm::LmParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, masks drawn from a generator seeded with the value.
    Train(u64),
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `tanh` through a single `exp`; within a few ulp of the libm version and
/// about three times faster.
pub(crate) fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut out = logits.mapv(|x| (x - max).exp());
    let total = out.sum();
    out /= total;
    out
}

/// Per-layer `(h, c)` vectors at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub layers: Vec<(Array1<f64>, Array1<f64>)>,
}

impl HiddenState {
    pub fn zeros(params: &LmParameters) -> Self {
        let h = params.config.hidden_dim;
        Self {
            layers: (0..params.layers.len())
                .map(|_| (Array1::zeros(h), Array1::zeros(h)))
                .collect(),
        }
    }

    /// The state a fresh sequence starts from.
    pub fn initial(params: &LmParameters) -> Self {
        params
            .boundary_state
            .clone()
            .unwrap_or_else(|| Self::zeros(params))
    }

    /// Top-layer `h`, the vector the decoder and the probes consume.
    pub fn top_h(&self) -> &Array1<f64> {
        &self.layers.last().unwrap().0
    }
}

/// Incremental single-sequence evaluator.
pub struct LstmState<'a> {
    params: &'a LmParameters,
    state: HiddenState,
    gates: Array1<f64>,
    dropout: Option<(f64, ChaCha8Rng)>,
}

impl<'a> LstmState<'a> {
    pub fn new(params: &'a LmParameters, mode: Mode) -> Self {
        let dropout = match mode {
            Mode::Train(seed) if params.config.dropout_rate > 0.0 => {
                Some((params.config.dropout_rate, ChaCha8Rng::seed_from_u64(seed)))
            }
            _ => None,
        };
        Self {
            params,
            state: HiddenState::initial(params),
            gates: Array1::zeros(4 * params.config.hidden_dim),
            dropout,
        }
    }

    pub fn hidden(&self) -> &HiddenState {
        &self.state
    }

    fn drop(&mut self, x: &mut Array1<f64>) {
        if let Some((p, rng)) = &mut self.dropout {
            let keep = 1.0 / (1.0 - *p);
            for v in x.iter_mut() {
                *v *= if rng.gen::<f64>() < *p { 0.0 } else { keep };
            }
        }
    }

    /// Consumes one token.
    pub fn step(&mut self, token: usize) -> Result<()> {
        let params = self.params;
        let vocab_size = params.config.vocab_size;
        if token >= vocab_size {
            return Err(Error::TokenOutOfRange {
                id: token,
                vocab_size,
            });
        }
        let hdim = params.config.hidden_dim;
        let mut input = params.embedding.row(token).to_owned();
        self.drop(&mut input);
        for l in 0..params.layers.len() {
            let layer = &params.layers[l];
            self.gates.assign(&layer.bias);
            general_mat_vec_mul(1.0, &layer.w_ih, &input, 1.0, &mut self.gates);
            let (h, c) = &mut self.state.layers[l];
            general_mat_vec_mul(1.0, &layer.w_hh, &*h, 1.0, &mut self.gates);
            let g = self.gates.as_slice().unwrap();
            let hs = h.as_slice_mut().unwrap();
            let cs = c.as_slice_mut().unwrap();
            for k in 0..hdim {
                let i = sigmoid(g[k]);
                let f = sigmoid(g[hdim + k]);
                let cand = tanh(g[2 * hdim + k]);
                let o = sigmoid(g[3 * hdim + k]);
                cs[k] = f * cs[k] + i * cand;
                hs[k] = o * tanh(cs[k]);
            }
            input = h.clone();
            if l + 1 < params.layers.len() {
                self.drop(&mut input);
            }
        }
        Ok(())
    }

    /// Decoder logits `W_dec . top_h + b_dec` for the next token.
    pub fn logits(&mut self) -> Array1<f64> {
        let mut top = self.state.top_h().clone();
        self.drop(&mut top);
        let mut logits = self.params.decoder_bias.clone();
        general_mat_vec_mul(1.0, &self.params.decoder, &top, 1.0, &mut logits);
        logits
    }

    pub fn next_distribution(&mut self) -> Array1<f64> {
        softmax(self.logits().view())
    }
}

/// Runs `prefix` and returns the final hidden state with the next-token
/// distribution `softmax(W_dec . top_h + b_dec)`.
pub fn forward(
    params: &LmParameters,
    prefix: &[usize],
    mode: Mode,
) -> Result<(HiddenState, Array1<f64>)> {
    if prefix.is_empty() {
        return Err(Error::Empty("prefix"));
    }
    let mut lstm = LstmState::new(params, mode);
    for &t in prefix {
        lstm.step(t)?;
    }
    let dist = lstm.next_distribution();
    Ok((lstm.state, dist))
}

/// `P(target | prefix)` by the chain rule over target tokens, eval mode.
pub fn token_conditional_prob(
    params: &LmParameters,
    prefix: &[usize],
    target: &[usize],
) -> Result<f64> {
    if prefix.is_empty() {
        return Err(Error::Empty("prefix"));
    }
    if target.is_empty() {
        return Err(Error::Empty("target"));
    }
    let mut lstm = LstmState::new(params, Mode::Eval);
    for &t in prefix {
        lstm.step(t)?;
    }
    let mut prob = 1.0;
    for (k, &t) in target.iter().enumerate() {
        if t >= params.config.vocab_size {
            return Err(Error::TokenOutOfRange {
                id: t,
                vocab_size: params.config.vocab_size,
            });
        }
        prob *= lstm.next_distribution()[t];
        if k + 1 < target.len() {
            lstm.step(t)?;
        }
    }
    Ok(prob)
}

/// Mean state right before each `<eos>` is consumed in `ids`, run from a
/// zero state. Feeding `<eos>` from here matches how sentences start in the
/// training stream, where state is carried across boundaries.
pub fn boundary_state(params: &LmParameters, ids: &[usize], eos: usize) -> Result<HiddenState> {
    let mut zeroed = params.clone();
    zeroed.boundary_state = None;
    let mut lstm = LstmState::new(&zeroed, Mode::Eval);
    let mut sum = HiddenState::zeros(params);
    let mut count = 0usize;
    for (k, &t) in ids.iter().enumerate() {
        if t == eos && k > 0 {
            for ((sh, sc), (h, c)) in sum.layers.iter_mut().zip(&lstm.state.layers) {
                *sh += h;
                *sc += c;
            }
            count += 1;
        }
        lstm.step(t)?;
    }
    if count == 0 {
        return Err(Error::Empty("sentence boundaries"));
    }
    for (h, c) in &mut sum.layers {
        *h /= count as f64;
        *c /= count as f64;
    }
    Ok(sum)
}

/// Encodes a sentence context as the model sees it during training: after
/// an `<eos>` boundary. Fails on out-of-vocabulary tokens.
pub fn encode_context(vocab: &Vocabulary, tokens: &[String]) -> Result<Vec<usize>> {
    let mut ids = vec![vocab.eos_id()];
    for t in tokens {
        ids.push(
            vocab
                .id(t)
                .ok_or_else(|| Error::OutOfVocabulary(t.clone()))?,
        );
    }
    Ok(ids)
}

/// Top-layer hidden states right before the NPI in the DM and UM versions.
pub fn prenpi_hidden(
    params: &LmParameters,
    vocab: &Vocabulary,
    pair: &MinimalPair,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let dm = pair.dm_prefix();
    let um = pair
        .um_prefix()
        .ok_or_else(|| Error::Dataset(format!("pair {} has no UM prefix", pair.pair_id)))?;
    if dm.is_empty() || um.is_empty() {
        return Err(Error::Empty("pair prefix"));
    }
    let (down, _) = forward(params, &encode_context(vocab, dm)?, Mode::Eval)?;
    let (up, _) = forward(params, &encode_context(vocab, um)?, Mode::Eval)?;
    Ok((down.top_h().clone(), up.top_h().clone()))
}

/// `exp` of the mean next-token cross-entropy over one contiguous stream,
/// starting from the model's initial state.
pub fn stream_perplexity(params: &LmParameters, ids: &[usize]) -> Result<f64> {
    if ids.len() < 2 {
        return Err(Error::Empty("token stream"));
    }
    let mut lstm = LstmState::new(params, Mode::Eval);
    let mut nll = 0.0;
    for w in ids.windows(2) {
        lstm.step(w[0])?;
        if w[1] >= params.config.vocab_size {
            return Err(Error::TokenOutOfRange {
                id: w[1],
                vocab_size: params.config.vocab_size,
            });
        }
        let logits = lstm.logits();
        let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        nll += lse - logits[w[1]];
    }
    Ok((nll / (ids.len() - 1) as f64).exp())
}

pub fn perplexity(params: &LmParameters, corpus: &Corpus, vocab: &Vocabulary) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    stream_perplexity(params, &vocab.encode(corpus))
}

/// Eval-mode next-token distribution after `prefix` from the hidden state
/// alone, used to check decoder consistency.
pub fn decode_hidden(params: &LmParameters, top_h: ArrayView1<f64>) -> Array1<f64> {
    let mut logits = params.decoder_bias.clone();
    general_mat_vec_mul(1.0, &params.decoder, &top_h, 1.0, &mut logits);
    softmax(logits.slice(s![..]))
}
