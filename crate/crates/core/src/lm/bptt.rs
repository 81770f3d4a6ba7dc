//! Batched forward and backward passes over one truncated-BPTT window.
//!
//! Activations are stored time-major: row `t * B + b` holds time step `t`
//! of batch column `b`. Each layer is run over the whole window before the
//! next one, so input projections and weight gradients are single large
//! matrix products and only the recurrent product is per step.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lm::infer::{sigmoid, tanh};
use crate::lm::{LmParameters, LstmLayer};

/// Token ids of one window, time-major (`inputs[t * batch_size + b]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub batch_size: usize,
}

impl Batch {
    pub fn seq_len(&self) -> usize {
        self.inputs.len() / self.batch_size
    }

    fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.batch_size == 0 || self.inputs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if self.inputs.len() != self.targets.len() || self.inputs.len() % self.batch_size != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.len(),
                actual: self.targets.len(),
            });
        }
        if let Some(&id) = self
            .inputs
            .iter()
            .chain(&self.targets)
            .find(|&&id| id >= vocab_size)
        {
            return Err(Error::TokenOutOfRange { id, vocab_size });
        }
        Ok(())
    }
}

/// Recurrent state per layer, each `B x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchState {
    pub h: Vec<Array2<f64>>,
    pub c: Vec<Array2<f64>>,
}

impl BatchState {
    pub fn zeros(params: &LmParameters, batch_size: usize) -> Self {
        let shape = (batch_size, params.config.hidden_dim);
        let n = params.layers.len();
        Self {
            h: vec![Array2::zeros(shape); n],
            c: vec![Array2::zeros(shape); n],
        }
    }
}

#[derive(Debug, Clone)]
pub struct WindowOutput {
    /// Mean cross-entropy over all `T * B` predictions.
    pub loss: f64,
    pub grads: LmParameters,
}

struct LayerCache {
    input: Array2<f64>,
    /// Post-activation gates i, f, g, o.
    acts: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
    h0: Array2<f64>,
    c0: Array2<f64>,
}

fn dropout_mask<R: Rng>(shape: (usize, usize), p: f64, rng: Option<&mut R>) -> Option<Array2<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_simple_fn(shape, || {
        if rng.gen::<f64>() < p {
            0.0
        } else {
            keep
        }
    }))
}

fn apply_mask(x: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        *x *= m;
    }
}

fn layer_forward(layer: &LstmLayer, input: Array2<f64>, h0: &Array2<f64>, c0: &Array2<f64>) -> LayerCache {
    let batch = h0.nrows();
    let hd = layer.hidden();
    let n = input.nrows();
    let steps = n / batch;
    let mut acts = Array2::zeros((n, 4 * hd));
    general_mat_mul(1.0, &input, &layer.w_ih.t(), 0.0, &mut acts);
    acts += &layer.bias;
    let mut c = Array2::zeros((n, hd));
    let mut tanh_c = Array2::zeros((n, hd));
    let mut h = Array2::zeros((n, hd));
    let acts_s = acts.as_slice_mut().unwrap();
    let c_s = c.as_slice_mut().unwrap();
    let tc_s = tanh_c.as_slice_mut().unwrap();
    let h_s = h.as_slice_mut().unwrap();
    let c0_s = c0.as_slice().unwrap();
    let width = batch * hd;
    for t in 0..steps {
        {
            let h_prev = if t == 0 {
                h0.view()
            } else {
                ArrayView2::from_shape((batch, hd), &h_s[(t - 1) * width..t * width]).unwrap()
            };
            let block = &mut acts_s[t * batch * 4 * hd..(t + 1) * batch * 4 * hd];
            let mut block = ArrayViewMut2::from_shape((batch, 4 * hd), block).unwrap();
            general_mat_mul(1.0, &h_prev, &layer.w_hh.t(), 1.0, &mut block);
        }
        let (c_done, c_rest) = c_s.split_at_mut(t * width);
        let c_prev_all = if t == 0 { c0_s } else { &c_done[(t - 1) * width..] };
        for b in 0..batch {
            let r = t * batch + b;
            let a = &mut acts_s[r * 4 * hd..(r + 1) * 4 * hd];
            let c_prev = &c_prev_all[b * hd..(b + 1) * hd];
            let c_row = &mut c_rest[b * hd..(b + 1) * hd];
            let tc_row = &mut tc_s[r * hd..(r + 1) * hd];
            let h_row = &mut h_s[r * hd..(r + 1) * hd];
            for k in 0..hd {
                let i = sigmoid(a[k]);
                let f = sigmoid(a[hd + k]);
                let g = tanh(a[2 * hd + k]);
                let o = sigmoid(a[3 * hd + k]);
                a[k] = i;
                a[hd + k] = f;
                a[2 * hd + k] = g;
                a[3 * hd + k] = o;
                let cell = f * c_prev[k] + i * g;
                let tc = tanh(cell);
                c_row[k] = cell;
                tc_row[k] = tc;
                h_row[k] = o * tc;
            }
        }
    }
    LayerCache {
        input,
        acts,
        c,
        tanh_c,
        h,
        h0: h0.clone(),
        c0: c0.clone(),
    }
}

/// Backpropagates `dh` (gradient of the loss w.r.t. this layer's outputs)
/// through the window, accumulating into `grads` and returning the
/// gradient w.r.t. the layer input.
fn layer_backward(
    layer: &LstmLayer,
    cache: &LayerCache,
    dh: &Array2<f64>,
    grads: &mut LstmLayer,
) -> Array2<f64> {
    let batch = cache.h0.nrows();
    let hd = layer.hidden();
    let n = dh.nrows();
    let steps = n / batch;
    let mut d_gates = Array2::<f64>::zeros((n, 4 * hd));
    let mut dh_next = Array2::<f64>::zeros((batch, hd));
    let mut dc_next = Array2::<f64>::zeros((batch, hd));
    for t in (0..steps).rev() {
        let dh_next_s = dh_next.as_slice().unwrap();
        let dc_next_s = dc_next.as_slice_mut().unwrap();
        for b in 0..batch {
            let r = t * batch + b;
            let a = cache.acts.row(r);
            let a = a.as_slice().unwrap();
            let tc = cache.tanh_c.row(r);
            let tc = tc.as_slice().unwrap();
            let c_prev = if t == 0 {
                cache.c0.row(b)
            } else {
                cache.c.row(r - batch)
            };
            let c_prev = c_prev.as_slice().unwrap();
            let dh_row = dh.row(r);
            let dh_row = dh_row.as_slice().unwrap();
            let dh_carry = &dh_next_s[b * hd..(b + 1) * hd];
            let dc_carry = &mut dc_next_s[b * hd..(b + 1) * hd];
            let mut dg = d_gates.row_mut(r);
            let dg = dg.as_slice_mut().unwrap();
            for k in 0..hd {
                let (i, f, g, o) = (a[k], a[hd + k], a[2 * hd + k], a[3 * hd + k]);
                let dh_k = dh_row[k] + dh_carry[k];
                let d_o = dh_k * tc[k];
                let dc = dc_carry[k] + dh_k * o * (1.0 - tc[k] * tc[k]);
                dc_carry[k] = dc * f;
                dg[k] = dc * g * i * (1.0 - i);
                dg[hd + k] = dc * c_prev[k] * f * (1.0 - f);
                dg[2 * hd + k] = dc * i * (1.0 - g * g);
                dg[3 * hd + k] = d_o * o * (1.0 - o);
            }
        }
        let block = d_gates.slice(s![t * batch..(t + 1) * batch, ..]);
        general_mat_mul(1.0, &block, &layer.w_hh, 0.0, &mut dh_next);
    }
    // Recurrent weight gradient: step 0 pairs with the initial state, later
    // steps with the previous step's output.
    general_mat_mul(
        1.0,
        &d_gates.slice(s![..batch, ..]).t(),
        &cache.h0,
        1.0,
        &mut grads.w_hh,
    );
    if steps > 1 {
        general_mat_mul(
            1.0,
            &d_gates.slice(s![batch.., ..]).t(),
            &cache.h.slice(s![..n - batch, ..]),
            1.0,
            &mut grads.w_hh,
        );
    }
    general_mat_mul(1.0, &d_gates.t(), &cache.input, 1.0, &mut grads.w_ih);
    grads.bias += &d_gates.sum_axis(Axis(0));
    let mut d_input = Array2::zeros((n, layer.w_ih.ncols()));
    general_mat_mul(1.0, &d_gates, &layer.w_ih, 0.0, &mut d_input);
    d_input
}

fn gather_rows(table: &Array2<f64>, ids: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
        row.assign(&table.row(id));
    }
    out
}

/// Forward + backward over one window. `state` is read as the initial
/// recurrent state and overwritten with the final one. Dropout is active iff
/// `rng` is given. Gradients are written into `grads` (overwritten).
pub fn window_step<R: Rng>(
    params: &LmParameters,
    batch: &Batch,
    state: &mut BatchState,
    rng: Option<&mut R>,
    grads: &mut LmParameters,
) -> Result<f64> {
    run_window(params, batch, state, rng, Some(grads))
}

/// Eval-mode forward pass over one window with state carry-over; returns
/// the mean loss without computing gradients.
pub fn window_eval(params: &LmParameters, batch: &Batch, state: &mut BatchState) -> Result<f64> {
    run_window::<rand_chacha::ChaCha8Rng>(params, batch, state, None, None)
}

fn run_window<R: Rng>(
    params: &LmParameters,
    batch: &Batch,
    state: &mut BatchState,
    rng: Option<&mut R>,
    grads: Option<&mut LmParameters>,
) -> Result<f64> {
    batch.validate(params.config.vocab_size)?;
    let b = batch.batch_size;
    if state.h.first().map(|h| h.nrows()) != Some(b) {
        return Err(Error::DimensionMismatch {
            expected: b,
            actual: state.h.first().map_or(0, |h| h.nrows()),
        });
    }
    let n = batch.inputs.len();
    let p = params.config.dropout_rate;
    let mut rng = rng;

    let mut x = gather_rows(&params.embedding, &batch.inputs);
    let emb_mask = dropout_mask((n, params.config.embed_dim), p, rng.as_deref_mut());
    apply_mask(&mut x, &emb_mask);

    let mut caches = Vec::with_capacity(params.layers.len());
    let mut masks = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let cache = layer_forward(layer, x, &state.h[l], &state.c[l]);
        let mut out = cache.h.clone();
        let mask = dropout_mask((n, params.config.hidden_dim), p, rng.as_deref_mut());
        apply_mask(&mut out, &mask);
        masks.push(mask);
        caches.push(cache);
        x = out;
    }
    let decoder_input = x;

    let mut logits = Array2::zeros((n, params.config.vocab_size));
    general_mat_mul(1.0, &decoder_input, &params.decoder.t(), 0.0, &mut logits);
    logits += &params.decoder_bias;

    // Softmax in place; the loss and dlogits = (p - onehot) / N follow.
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (mut row, &target) in logits.rows_mut().into_iter().zip(&batch.targets) {
        let row = row.as_slice_mut().unwrap();
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        loss += total.ln() + max - (row[target].ln() + max);
        if grads.is_none() {
            continue;
        }
        let scale = inv_n / total;
        for v in row.iter_mut() {
            *v *= scale;
        }
        row[target] -= inv_n;
    }
    let Some(grads) = grads else {
        save_state(state, &caches, b);
        return Ok(loss * inv_n);
    };
    let d_logits = logits;

    grads.fill_zero();
    general_mat_mul(1.0, &d_logits.t(), &decoder_input, 0.0, &mut grads.decoder);
    grads.decoder_bias.assign(&d_logits.sum_axis(Axis(0)));
    let mut d_out = Array2::zeros((n, params.config.hidden_dim));
    general_mat_mul(1.0, &d_logits, &params.decoder, 0.0, &mut d_out);

    for l in (0..params.layers.len()).rev() {
        apply_mask(&mut d_out, &masks[l]);
        d_out = layer_backward(&params.layers[l], &caches[l], &d_out, &mut grads.layers[l]);
    }
    apply_mask(&mut d_out, &emb_mask);
    for (row, &id) in d_out.rows().into_iter().zip(&batch.inputs) {
        let mut target = grads.embedding.row_mut(id);
        target += &row;
    }

    save_state(state, &caches, b);
    Ok(loss * inv_n)
}

fn save_state(state: &mut BatchState, caches: &[LayerCache], batch: usize) {
    for (l, cache) in caches.iter().enumerate() {
        let n = cache.h.nrows();
        state.h[l].assign(&cache.h.slice(s![n - batch.., ..]));
        state.c[l].assign(&cache.c.slice(s![n - batch.., ..]));
    }
}

/// Mean window loss in eval mode (no dropout) from a zero state.
pub fn window_loss(params: &LmParameters, batch: &Batch) -> Result<f64> {
    let mut state = BatchState::zeros(params, batch.batch_size);
    window_eval(params, batch, &mut state)
}

/// Raw analytic gradients of the mean cross-entropy over `batch`, eval mode
/// from a zero state. Clipping is the caller's concern.
pub fn gradients(params: &LmParameters, batch: &Batch) -> Result<WindowOutput> {
    let mut state = BatchState::zeros(params, batch.batch_size);
    let mut grads = LmParameters::zeros(&params.config);
    let loss = window_step::<rand_chacha::ChaCha8Rng>(params, batch, &mut state, None, &mut grads)?;
    Ok(WindowOutput { loss, grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{stream_perplexity, LmConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(v: usize, h: usize, seed: u64) -> LmConfig {
        LmConfig {
            vocab_size: v,
            embed_dim: h,
            hidden_dim: h,
            dropout_rate: 0.0,
            seed,
            ..LmConfig::default()
        }
    }

    fn random_batch(v: usize, t: usize, b: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch {
            inputs: (0..t * b).map(|_| rng.gen_range(0..v)).collect(),
            targets: (0..t * b).map(|_| rng.gen_range(0..v)).collect(),
            batch_size: b,
        }
    }

    #[test]
    fn batched_loss_matches_sequential_evaluator() {
        let params = LmParameters::init(&config(13, 7, 2));
        let ids: Vec<usize> = (0..9).map(|i| (i * 5 + 1) % 13).collect();
        let batch = Batch {
            inputs: ids[..8].to_vec(),
            targets: ids[1..].to_vec(),
            batch_size: 1,
        };
        let loss = window_loss(&params, &batch).unwrap();
        let ppl = stream_perplexity(&params, &ids).unwrap();
        assert!((loss.exp() - ppl).abs() < 1e-12 * ppl);
    }

    #[test]
    fn unused_embedding_rows_get_zero_gradient() {
        let params = LmParameters::init(&config(20, 8, 1));
        let batch = Batch {
            inputs: vec![1, 2, 3, 4, 5, 6],
            targets: vec![2, 3, 4, 5, 6, 7],
            batch_size: 2,
        };
        let out = gradients(&params, &batch).unwrap();
        for id in 0..20 {
            let used = batch.inputs.contains(&id);
            let norm: f64 = out.grads.embedding.row(id).iter().map(|x| x.abs()).sum();
            assert_eq!(norm == 0.0, !used, "row {id}");
        }
    }

    #[test]
    fn zero_learning_rate_step_is_a_no_op() {
        let mut params = LmParameters::init(&config(20, 8, 3));
        let batch = random_batch(20, 5, 2, 4);
        let before = window_loss(&params, &batch).unwrap();
        let out = gradients(&params, &batch).unwrap();
        params.sgd_step(&out.grads, 0.0);
        assert_eq!(window_loss(&params, &batch).unwrap(), before);
        assert_eq!(out.loss, before);
    }

    #[test]
    fn state_carries_over_between_windows() {
        let params = LmParameters::init(&config(11, 6, 5));
        let ids: Vec<usize> = (0..11).map(|i| (i * 3) % 11).collect();
        let whole = Batch {
            inputs: ids[..10].to_vec(),
            targets: ids[1..].to_vec(),
            batch_size: 1,
        };
        let full = window_loss(&params, &whole).unwrap();
        let mut state = BatchState::zeros(&params, 1);
        let mut grads = LmParameters::zeros(&params.config);
        let mut total = 0.0;
        for chunk in [0..4, 4..10] {
            let part = Batch {
                inputs: ids[chunk.clone()].to_vec(),
                targets: ids[chunk.start + 1..chunk.end + 1].to_vec(),
                batch_size: 1,
            };
            let loss = window_step::<ChaCha8Rng>(&params, &part, &mut state, None, &mut grads).unwrap();
            total += loss * part.inputs.len() as f64;
        }
        assert!((total / 10.0 - full).abs() < 1e-12);
    }

    #[test]
    fn eval_pass_matches_training_pass_without_dropout() {
        let params = LmParameters::init(&config(12, 5, 8));
        let batch = random_batch(12, 6, 3, 9);
        let mut s1 = BatchState::zeros(&params, 3);
        let mut s2 = s1.clone();
        let mut grads = LmParameters::zeros(&params.config);
        let a = window_step::<ChaCha8Rng>(&params, &batch, &mut s1, None, &mut grads).unwrap();
        let b = window_eval(&params, &batch, &mut s2).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(s1, s2);
    }

    #[test]
    fn dropout_changes_loss_deterministically() {
        let mut cfg = config(15, 6, 1);
        cfg.dropout_rate = 0.3;
        let params = LmParameters::init(&cfg);
        let batch = random_batch(15, 4, 3, 2);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = BatchState::zeros(&params, 3);
            let mut grads = LmParameters::zeros(&params.config);
            window_step(&params, &batch, &mut state, Some(&mut rng), &mut grads).unwrap()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), window_loss(&params, &batch).unwrap());
    }

    #[test]
    fn rejects_malformed_batches() {
        let params = LmParameters::init(&config(10, 4, 0));
        let bad = Batch {
            inputs: vec![1, 2, 3],
            targets: vec![1, 2],
            batch_size: 1,
        };
        assert!(gradients(&params, &bad).is_err());
        let oov = Batch {
            inputs: vec![1, 10],
            targets: vec![1, 2],
            batch_size: 1,
        };
        assert!(gradients(&params, &oov).is_err());
    }
}

#[cfg(test)]
mod gradcheck {
    use super::*;
    use crate::lm::LmConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_matches_central_differences() {
        let cfg = LmConfig {
            vocab_size: 20,
            embed_dim: 8,
            hidden_dim: 8,
            dropout_rate: 0.0,
            seed: 11,
            ..LmConfig::default()
        };
        let params = LmParameters::init(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = Batch {
            inputs: (0..10).map(|_| rng.gen_range(0..20)).collect(),
            targets: (0..10).map(|_| rng.gen_range(0..20)).collect(),
            batch_size: 2,
        };
        let analytic = gradients(&params, &batch).unwrap().grads;
        let names = LmParameters::tensor_names(2);
        let eps = 1e-5;
        let mut worst = (0.0, String::new());
        for (ti, (_, g)) in analytic.tensors().into_iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].1[k] += eps;
                let mut minus = params.clone();
                minus.tensors_mut()[ti].1[k] -= eps;
                let num = (window_loss(&plus, &batch).unwrap() - window_loss(&minus, &batch).unwrap())
                    / (2.0 * eps);
                let rel = (g[k] - num).abs() / g[k].abs().max(num.abs()).max(1e-6);
                if rel > worst.0 {
                    worst = (rel, format!("{}[{k}] a={} n={num}", names[ti], g[k]));
                }
            }
        }
        assert!(worst.0 <= 1e-4, "{worst:?}");
    }
}
