//! Manifest + binary tensor files shared by LM checkpoints and DC weights.
//!
//! Layout: a UTF-8 manifest of `key=value` lines (format tag, version,
//! kind, metadata, then one `tensor=<name> <d0>x<d1>...` line per tensor in
//! payload order) terminated by a line `end`, followed by the payload of
//! row-major little-endian `f64` values in directory order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &str = "monoprobe-tensors";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<Tensor>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl TensorFile {
    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| corrupt(format!("missing metadata `{key}`")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| corrupt(format!("bad value `{raw}` for `{key}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| corrupt(format!("missing tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = format!("format={MAGIC}\nversion={VERSION}\nkind={}\n", self.kind);
        for (k, v) in &self.meta {
            head.push_str(&format!("{k}={v}\n"));
        }
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            head.push_str(&format!("tensor={} {}\n", t.name, dims.join("x")));
        }
        head.push_str("end\n");
        let mut bytes = head.into_bytes();
        for t in &self.tensors {
            for x in &t.data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = bytes
            .windows(5)
            .position(|w| w == b"\nend\n")
            .ok_or_else(|| corrupt("manifest terminator not found"))?;
        let head = std::str::from_utf8(&bytes[..end])
            .map_err(|_| corrupt("manifest is not UTF-8"))?;
        let mut payload = &bytes[end + 5..];

        let mut kind = None;
        let mut meta = Vec::new();
        let mut directory = Vec::new();
        for (i, line) in head.lines().enumerate() {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| corrupt(format!("bad manifest line `{line}`")))?;
            match (i, key) {
                (0, "format") if value == MAGIC => {}
                (0, _) => return Err(corrupt("not a monoprobe tensor file")),
                (1, "version") => {
                    if value != VERSION.to_string() {
                        return Err(corrupt(format!("unsupported version {value}")));
                    }
                }
                (1, _) => return Err(corrupt("missing version")),
                (_, "kind") => kind = Some(value.to_string()),
                (_, "tensor") => {
                    let (name, dims) = value
                        .split_once(' ')
                        .ok_or_else(|| corrupt(format!("bad tensor entry `{value}`")))?;
                    let shape = dims
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| corrupt(format!("bad shape `{dims}`")))?;
                    directory.push((name.to_string(), shape));
                }
                _ => meta.push((key.to_string(), value.to_string())),
            }
        }
        let kind = kind.ok_or_else(|| corrupt("missing kind"))?;
        let expected: usize = directory
            .iter()
            .map(|(_, s)| s.iter().product::<usize>() * 8)
            .sum();
        if payload.len() != expected {
            return Err(corrupt(format!(
                "payload has {} bytes, directory needs {expected}",
                payload.len()
            )));
        }
        let mut tensors = Vec::with_capacity(directory.len());
        for (name, shape) in directory {
            let count: usize = shape.iter().product();
            let (chunk, rest) = payload.split_at(count * 8);
            payload = rest;
            let data = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Self {
            kind,
            meta,
            tensors,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
