use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::{Tensor, TensorFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcConfig {
    pub learning_rate: f64,
    pub l1_lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub convergence_tol: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for DcConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            l1_lambda: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 200,
            convergence_tol: 1e-6,
            folds: 10,
            seed: 0,
        }
    }
}

impl DcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("DC learning_rate must be positive".into()));
        }
        if !(self.l1_lambda >= 0.0) {
            return Err(Error::Config("l1_lambda must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must be in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::Config(
                "epsilon and convergence_tol must be positive".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        Ok(())
    }
}

/// A linear diagnostic classifier: label 1 iff `w . x + b > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcWeights {
    pub w: Array1<f64>,
    pub b: f64,
}

const KIND: &str = "dc";

impl DcWeights {
    pub fn score(&self, x: ArrayView1<f64>) -> f64 {
        self.w.dot(&x) + self.b
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> bool {
        self.score(x) > 0.0
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, y: &[bool]) -> f64 {
        let hits = x
            .rows()
            .into_iter()
            .zip(y)
            .filter(|(row, &label)| self.predict(*row) == label)
            .count();
        hits as f64 / y.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        TensorFile {
            kind: KIND.into(),
            meta: vec![("dim".into(), self.w.len().to_string())],
            tensors: vec![
                Tensor {
                    name: "w".into(),
                    shape: vec![self.w.len()],
                    data: self.w.to_vec(),
                },
                Tensor {
                    name: "b".into(),
                    shape: vec![1],
                    data: vec![self.b],
                },
            ],
        }
        .write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = TensorFile::read(path)?;
        if file.kind != KIND {
            return Err(Error::Checkpoint(format!(
                "expected kind {KIND}, found {}",
                file.kind
            )));
        }
        let dim: usize = file.meta_parse("dim")?;
        let w = file.tensor("w")?;
        let b = file.tensor("b")?;
        if w.shape != [dim] || b.shape != [1] {
            return Err(Error::Checkpoint("DC tensor shapes do not match".into()));
        }
        Ok(Self {
            w: Array1::from(w.data.clone()),
            b: b.data[0],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcTrainLog {
    /// Objective after each epoch: mean logistic loss plus `lambda * |w|_1`.
    pub losses: Vec<f64>,
    pub converged: bool,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn objective(x: ArrayView2<f64>, y: &[bool], w: &Array1<f64>, b: f64, lambda: f64) -> f64 {
    let z = x.dot(w) + b;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &label)| if label { softplus(-z) } else { softplus(z) })
        .sum();
    data / y.len() as f64 + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Full-batch Adam on the mean logistic loss with a proximal L1 step.
///
/// The soft threshold is applied in Adam's diagonal metric: with
/// `D = sqrt(v_hat) + eps`, the step is
/// `w <- shrink(w - lr * m_hat / D, lr * lambda / D)`. A coordinate at zero
/// therefore stays at zero whenever `|m_hat| <= lambda`. The bias is
/// unregularized. Weights start at zero, so training is deterministic.
pub fn train_dc_arrays(
    x: ArrayView2<f64>,
    y: &[bool],
    config: &DcConfig,
) -> Result<(DcWeights, DcTrainLog)> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if !y.iter().any(|&l| l) || y.iter().all(|&l| l) {
        return Err(Error::Dataset("DC training needs both labels".into()));
    }
    let n = y.len() as f64;
    let d = x.ncols();
    let targets: Array1<f64> = y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let (lr, lambda) = (config.learning_rate, config.l1_lambda);
    let (b1, b2, eps) = (config.beta1, config.beta2, config.epsilon);

    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut m_w = Array1::<f64>::zeros(d);
    let mut v_w = Array1::<f64>::zeros(d);
    let (mut m_b, mut v_b) = (0.0, 0.0);
    let mut prev = objective(x, y, &w, b, lambda);
    let mut log = DcTrainLog {
        losses: Vec::new(),
        converged: false,
    };

    for t in 1..=config.max_epochs {
        let z = x.dot(&w) + b;
        let residual = z.mapv(crate::lm::sigmoid) - &targets;
        let g_w = x.t().dot(&residual) / n;
        let g_b = residual.sum() / n;

        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        for k in 0..d {
            m_w[k] = b1 * m_w[k] + (1.0 - b1) * g_w[k];
            v_w[k] = b2 * v_w[k] + (1.0 - b2) * g_w[k] * g_w[k];
            let m_hat = m_w[k] / c1;
            let denom = (v_w[k] / c2).sqrt() + eps;
            w[k] = soft_threshold(w[k] - lr * m_hat / denom, lr * lambda / denom);
        }
        m_b = b1 * m_b + (1.0 - b1) * g_b;
        v_b = b2 * v_b + (1.0 - b2) * g_b * g_b;
        b -= lr * (m_b / c1) / ((v_b / c2).sqrt() + eps);

        let loss = objective(x, y, &w, b, lambda);
        log.losses.push(loss);
        if prev - loss < config.convergence_tol {
            log.converged = true;
            break;
        }
        prev = loss;
    }
    if !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Err(Error::Dataset("DC training produced non-finite weights".into()));
    }
    Ok((DcWeights { w, b }, log))
}

pub(crate) fn stack(rows: &[&Array1<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().ok_or(Error::Empty("feature rows"))?.len();
    let mut out = Array2::zeros((rows.len(), d));
    for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
        if src.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: src.len(),
            });
        }
        dst.assign(*src);
    }
    Ok(out)
}
