//! Checkpoint container.
//!
//! Layout, in order:
//!
//! ```text
//! VACKPT 1
//! architecture = <lstm|ed|lru|s4d|s6>
//! cond_dim = <P>
//! sample_rate = <Hz>
//! best_epoch = <index|none>
//! meta <key> = <value>              (zero or more)
//! array <name> <rows> <cols>        (one per array)
//! end
//! <arrays as little-endian f64, row-major, in header order>
//! <SHA-256 of every preceding byte>
//! ```
//!
//! Weight arrays come first in [`ModelWeights::tensors`] order, then the
//! training history arrays `history.train_loss`, `history.val_loss` and
//! `history.lr` (each `1 x epochs`).

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Architecture, Model, ModelConfig, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &str = "VACKPT 1";
const DIGEST_LEN: usize = 32;
const HISTORY_NAMES: [&str; 3] = ["history.train_loss", "history.val_loss", "history.lr"];

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub weights: ModelWeights,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub lr: Vec<f64>,
    pub best_epoch: Option<usize>,
    /// Free-form provenance such as dataset name or seed.
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self {
            config: model.config().clone(),
            weights: model.weights().clone(),
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            lr: Vec::new(),
            best_epoch: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        Model::new(self.config.clone(), self.weights.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = String::new();
        header.push_str(CHECKPOINT_MAGIC);
        header.push('\n');
        header.push_str(&format!("architecture = {}\n", self.config.architecture));
        header.push_str(&format!("cond_dim = {}\n", self.config.cond_dim));
        header.push_str(&format!("sample_rate = {}\n", self.config.sample_rate));
        match self.best_epoch {
            Some(e) => header.push_str(&format!("best_epoch = {e}\n")),
            None => header.push_str("best_epoch = none\n"),
        }
        for (k, v) in &self.meta {
            if k.is_empty()
                || k.contains(char::is_whitespace)
                || k.contains('=')
                || v.contains('\n')
            {
                return Err(Error::Input(format!(
                    "metadata entry '{k}' cannot be stored in a header"
                )));
            }
            header.push_str(&format!("meta {k} = {v}\n"));
        }
        let mut payload: Vec<u8> = Vec::new();
        let mut put = |header: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]| {
            header.push_str(&format!("array {name} {rows} {cols}\n"));
            for x in data {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        };
        for (name, m) in self.weights.tensors() {
            put(&mut header, name, m.rows(), m.cols(), m.as_slice());
        }
        for (name, v) in HISTORY_NAMES
            .iter()
            .zip([&self.train_loss, &self.val_loss, &self.lr])
        {
            put(&mut header, name, 1, v.len(), v);
        }
        header.push_str("end\n");
        let mut bytes = header.into_bytes();
        bytes.extend_from_slice(&payload);
        let digest = Sha256::digest(&bytes);
        bytes.extend_from_slice(&digest);
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |msg: String| Error::Format(format!("checkpoint: {msg}"));
        if bytes.len() < DIGEST_LEN + CHECKPOINT_MAGIC.len() {
            return Err(fmt(format!("file too short ({} bytes)", bytes.len())));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(fmt("checksum mismatch (truncated or corrupted file)".into()));
        }
        let end = find_subslice(body, b"\nend\n")
            .ok_or_else(|| fmt("header terminator not found".into()))?;
        let header =
            std::str::from_utf8(&body[..end + 1]).map_err(|_| fmt("header is not UTF-8".into()))?;
        let mut payload = &body[end + 5..];

        let mut lines = header.lines();
        match lines.next() {
            Some(CHECKPOINT_MAGIC) => {}
            Some(l) if l.starts_with("VACKPT") => {
                return Err(fmt(format!("unsupported version '{l}'")))
            }
            _ => return Err(fmt("missing magic line".into())),
        }
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        let mut meta = BTreeMap::new();
        let mut arrays: Vec<(String, Matrix)> = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("array ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let [name, rows, cols] = parts[..] else {
                    return Err(fmt(format!("malformed array line '{line}'")));
                };
                let rows: usize = rows
                    .parse()
                    .map_err(|_| fmt(format!("bad row count in '{line}'")))?;
                let cols: usize = cols
                    .parse()
                    .map_err(|_| fmt(format!("bad column count in '{line}'")))?;
                let n = rows
                    .checked_mul(cols)
                    .filter(|n| n.checked_mul(8).is_some_and(|b| b <= payload.len()))
                    .ok_or_else(|| fmt(format!("array '{name}' exceeds the payload")))?;
                let (chunk, rest) = payload.split_at(n * 8);
                payload = rest;
                let data = chunk
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect();
                arrays.push((name.to_string(), Matrix::from_vec(rows, cols, data)?));
            } else if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest
                    .split_once(" = ")
                    .ok_or_else(|| fmt(format!("malformed meta line '{line}'")))?;
                meta.insert(k.to_string(), v.to_string());
            } else {
                let (k, v) = line
                    .split_once(" = ")
                    .ok_or_else(|| fmt(format!("malformed header line '{line}'")))?;
                if fields.insert(k, v).is_some() {
                    return Err(fmt(format!("duplicate header key '{k}'")));
                }
            }
        }
        if !payload.is_empty() {
            return Err(fmt(format!("{} trailing payload bytes", payload.len())));
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| fmt(format!("missing header key '{k}'")))
        };
        let architecture: Architecture = get("architecture")?
            .parse()
            .map_err(|e: Error| fmt(e.to_string()))?;
        let cond_dim: usize = get("cond_dim")?
            .parse()
            .map_err(|_| fmt("bad cond_dim".into()))?;
        let sample_rate: u32 = get("sample_rate")?
            .parse()
            .map_err(|_| fmt("bad sample_rate".into()))?;
        let best_epoch = match get("best_epoch")? {
            "none" => None,
            s => Some(s.parse().map_err(|_| fmt("bad best_epoch".into()))?),
        };
        if cond_dim > 4096 {
            return Err(fmt(format!("implausible cond_dim {cond_dim}")));
        }
        let config = ModelConfig {
            architecture,
            cond_dim,
            sample_rate,
        };
        let mut weights = ModelWeights::zeros(&config);
        let mut it = arrays.into_iter();
        for (name, slot) in weights.tensors_mut() {
            let (got, m) = it
                .next()
                .ok_or_else(|| fmt(format!("missing array '{name}'")))?;
            if got != name || !m.same_shape(slot) {
                return Err(fmt(format!(
                    "expected array '{name}' {}x{}, found '{got}' {}x{}",
                    slot.rows(),
                    slot.cols(),
                    m.rows(),
                    m.cols()
                )));
            }
            *slot = m;
        }
        let mut history = Vec::new();
        for name in HISTORY_NAMES {
            let (got, m) = it
                .next()
                .ok_or_else(|| fmt(format!("missing array '{name}'")))?;
            if got != name || m.rows() != 1 {
                return Err(fmt(format!(
                    "expected history array '{name}', found '{got}'"
                )));
            }
            history.push(m.as_slice().to_vec());
        }
        if let Some((extra, _)) = it.next() {
            return Err(fmt(format!("unexpected array '{extra}'")));
        }
        let lr = history.pop().unwrap_or_default();
        let val_loss = history.pop().unwrap_or_default();
        let train_loss = history.pop().unwrap_or_default();
        Ok(Self {
            config,
            weights,
            train_loss,
            val_loss,
            lr,
            best_epoch,
            meta,
        })
    }
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
