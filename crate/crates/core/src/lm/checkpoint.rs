use std::path::Path;

use crate::error::{Error, Result};
use crate::lm::{HiddenState, LmConfig, LmParameters};
use crate::tensorio::{Tensor, TensorFile};

pub const CHECKPOINT_VERSION: u32 = crate::tensorio::VERSION;
const KIND: &str = "lstm-lm";

fn to_file(params: &LmParameters) -> TensorFile {
    let c = &params.config;
    let meta = vec![
        ("vocab_size".to_string(), c.vocab_size.to_string()),
        ("embed_dim".to_string(), c.embed_dim.to_string()),
        ("hidden_dim".to_string(), c.hidden_dim.to_string()),
        ("num_layers".to_string(), c.num_layers.to_string()),
        // `{:?}` prints the shortest string that parses back to the same f64.
        ("dropout_rate".to_string(), format!("{:?}", c.dropout_rate)),
        ("seed".to_string(), c.seed.to_string()),
    ];
    let mut tensors: Vec<Tensor> = LmParameters::tensor_names(c.num_layers)
        .into_iter()
        .zip(params.tensors())
        .map(|(name, (shape, data))| Tensor {
            name,
            shape,
            data: data.to_vec(),
        })
        .collect();
    if let Some(state) = &params.boundary_state {
        for (l, (h, c)) in state.layers.iter().enumerate() {
            for (part, v) in [("h", h), ("c", c)] {
                tensors.push(Tensor {
                    name: boundary_name(l, part),
                    shape: vec![v.len()],
                    data: v.to_vec(),
                });
            }
        }
    }
    TensorFile {
        kind: KIND.into(),
        meta,
        tensors,
    }
}

fn boundary_name(layer: usize, part: &str) -> String {
    format!("boundary.{layer}.{part}")
}

fn from_file(file: &TensorFile) -> Result<LmParameters> {
    if file.kind != KIND {
        return Err(Error::Checkpoint(format!(
            "expected kind {KIND}, found {}",
            file.kind
        )));
    }
    let config = LmConfig {
        vocab_size: file.meta_parse("vocab_size")?,
        embed_dim: file.meta_parse("embed_dim")?,
        hidden_dim: file.meta_parse("hidden_dim")?,
        num_layers: file.meta_parse("num_layers")?,
        dropout_rate: file.meta_parse("dropout_rate")?,
        seed: file.meta_parse("seed")?,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut params = LmParameters::zeros(&config);
    let names = LmParameters::tensor_names(config.num_layers);
    let extra = file.tensors.len().checked_sub(names.len());
    let boundary = 2 * config.num_layers;
    if extra != Some(0) && extra != Some(boundary) {
        return Err(Error::Checkpoint(format!(
            "expected {} or {} tensors, found {}",
            names.len(),
            names.len() + boundary,
            file.tensors.len()
        )));
    }
    for ((name, (shape, slot)), stored) in names
        .iter()
        .zip(params.tensors_mut())
        .zip(&file.tensors)
    {
        if &stored.name != name || stored.shape != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {} {:?} does not match expected {name} {shape:?}",
                stored.name, stored.shape
            )));
        }
        slot.copy_from_slice(&stored.data);
    }
    if extra == Some(boundary) {
        let mut state = HiddenState::zeros(&params);
        let stored = &file.tensors[names.len()..];
        for (l, (h, c)) in state.layers.iter_mut().enumerate() {
            for (k, (part, slot)) in [("h", h), ("c", c)].into_iter().enumerate() {
                let t = &stored[2 * l + k];
                if t.name != boundary_name(l, part) || t.shape != [slot.len()] {
                    return Err(Error::Checkpoint(format!(
                        "tensor {} {:?} does not match expected {}",
                        t.name,
                        t.shape,
                        boundary_name(l, part)
                    )));
                }
                slot.as_slice_mut().unwrap().copy_from_slice(&t.data);
            }
        }
        params.boundary_state = Some(state);
    }
    if !params.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter values".into()));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &LmParameters, path: impl AsRef<Path>) -> Result<()> {
    to_file(params).write(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<LmParameters> {
    from_file(&TensorFile::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{forward, Mode};

    fn params() -> LmParameters {
        LmParameters::init(&LmConfig {
            vocab_size: 17,
            embed_dim: 5,
            hidden_dim: 4,
            dropout_rate: 0.1,
            seed: 9,
            ..LmConfig::default()
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let p = params();
        save_checkpoint(&p, &a).unwrap();
        let loaded = load_checkpoint(&a).unwrap();
        assert_eq!(loaded, p);
        save_checkpoint(&loaded, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let (_, d1) = forward(&p, &[1, 2, 3], Mode::Eval).unwrap();
        let (_, d2) = forward(&loaded, &[1, 2, 3], Mode::Eval).unwrap();
        assert!(d1.iter().zip(&d2).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn boundary_state_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut p = params();
        let (state, _) = forward(&p, &[3, 0, 5, 0], Mode::Eval).unwrap();
        p.boundary_state = Some(state);
        save_checkpoint(&p, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, p);
        let (_, d1) = forward(&p, &[1, 2], Mode::Eval).unwrap();
        let (_, d2) = forward(&loaded, &[1, 2], Mode::Eval).unwrap();
        assert!(d1.iter().zip(&d2).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn truncated_or_mismatched_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&params(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_checkpoint(&path).is_err());

        let text = String::from_utf8_lossy(&bytes).replace("hidden_dim=4", "hidden_dim=3");
        std::fs::write(&path, text.as_bytes()).unwrap();
        assert!(load_checkpoint(&path).is_err());
        assert!(load_checkpoint(dir.path().join("missing")).is_err());
    }
}
