//! Truncated backpropagation through time, Adam, learning-rate schedule,
//! early stopping and a finite-difference gradient audit.

mod audit;
mod backward;
mod optim;
mod run;

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use audit::{finite_difference_audit, relative_error, AuditReport, AUDIT_REL_FLOOR};
pub use backward::backward_segment;
pub use optim::{adam_update, clip_grad_norm, AdamConfig, AdamMoments};
pub use run::{train, write_history_csv, EpochRecord, Stream, TrainHistory, TrainOutcome};

use crate::error::{Error, Result};
use crate::model::{Model, ModelWeights};
use crate::numerics::Matrix;

/// How the decay exponent advances with the epoch index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    /// Exponent `floor(epoch / decay_every)`.
    Staged,
    /// Exponent equal to the epoch index.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub decay_base: f64,
    pub lr_schedule: LrSchedule,
    pub decay_every: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub segment_len: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
    /// Stop as soon as the validation ESR falls below this value.
    pub target_val_esr: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 3e-4,
            decay_base: 0.25,
            lr_schedule: LrSchedule::Staged,
            decay_every: 50,
            max_epochs: 200,
            patience: 10,
            segment_len: 2400,
            batch_size: 32,
            clip_norm: 1.0,
            seed: 0,
            target_val_esr: None,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 11] = [
        "initial_lr",
        "decay_base",
        "lr_schedule",
        "decay_every",
        "max_epochs",
        "patience",
        "segment_len",
        "batch_size",
        "clip_norm",
        "seed",
        "target_val_esr",
    ];

    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("config line {}: expected 'key = value'", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Format(format!("config line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Input(format!("'{v}' is not a valid value for {key}")))
        }
        match key {
            "initial_lr" => self.initial_lr = num(key, value)?,
            "decay_base" => self.decay_base = num(key, value)?,
            "lr_schedule" => {
                self.lr_schedule = match value {
                    "staged" => LrSchedule::Staged,
                    "literal" => LrSchedule::Literal,
                    _ => {
                        return Err(Error::Input(format!(
                            "lr_schedule must be staged or literal, got '{value}'"
                        )))
                    }
                }
            }
            "decay_every" => self.decay_every = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "segment_len" => self.segment_len = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "target_val_esr" => {
                self.target_val_esr = match value {
                    "none" | "" => None,
                    v => Some(num(key, v)?),
                }
            }
            _ => return Err(Error::Input(format!("unknown training key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must be positive")))
            }
        };
        pos(
            "initial_lr",
            self.initial_lr > 0.0 && self.initial_lr.is_finite(),
        )?;
        pos(
            "decay_base",
            self.decay_base > 0.0 && self.decay_base.is_finite(),
        )?;
        pos("decay_every", self.decay_every > 0)?;
        pos("max_epochs", self.max_epochs > 0)?;
        pos("segment_len", self.segment_len > 0)?;
        pos("batch_size", self.batch_size > 0)?;
        pos("clip_norm", self.clip_norm > 0.0)?;
        Ok(())
    }

    /// Inverse of [`TrainConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sched = match self.lr_schedule {
            LrSchedule::Staged => "staged",
            LrSchedule::Literal => "literal",
        };
        let _ = writeln!(s, "initial_lr = {}", self.initial_lr);
        let _ = writeln!(s, "decay_base = {}", self.decay_base);
        let _ = writeln!(s, "lr_schedule = {sched}");
        let _ = writeln!(s, "decay_every = {}", self.decay_every);
        let _ = writeln!(s, "max_epochs = {}", self.max_epochs);
        let _ = writeln!(s, "patience = {}", self.patience);
        let _ = writeln!(s, "segment_len = {}", self.segment_len);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "clip_norm = {}", self.clip_norm);
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.target_val_esr {
            Some(v) => {
                let _ = writeln!(s, "target_val_esr = {v}");
            }
            None => s.push_str("target_val_esr = none\n"),
        }
        s
    }
}

/// Learning rate for a zero-based epoch index.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    let e = match cfg.lr_schedule {
        LrSchedule::Staged => epoch / cfg.decay_every,
        LrSchedule::Literal => epoch,
    };
    cfg.initial_lr * cfg.decay_base.powi(e.min(i32::MAX as usize) as i32)
}

/// Mean squared error.
pub fn loss_mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Dimension(format!(
            "loss operands have lengths {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Input("loss of an empty signal".into()));
    }
    Ok(y.iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64)
}

/// One gradient array per weight array, same names and shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet(pub ModelWeights);

impl GradientSet {
    pub fn zeros_for(model: &Model) -> Self {
        Self(model.weights().zeros_like())
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        self.0.tensors()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.0
            .tensors()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m)
    }

    pub fn global_norm(&self) -> f64 {
        self.0
            .tensors()
            .iter()
            .map(|(_, m)| m.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for (_, m) in self.0.tensors_mut() {
            m.scale(s);
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for ((_, a), (_, b)) in self.0.tensors_mut().into_iter().zip(other.0.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.tensors().iter().all(|(_, m)| m.all_finite())
    }
}

#[cfg(test)]
mod tests;
