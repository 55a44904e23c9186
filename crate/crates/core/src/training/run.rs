use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    adam_update, backward_segment, clip_grad_norm, lr_at_epoch, AdamConfig, AdamMoments,
    GradientSet, TrainConfig,
};
use crate::error::{Error, Result};
use crate::model::{Model, ModelState};

/// One contiguous stretch of paired audio with fixed conditioning.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub params: Vec<f64>,
    pub label: String,
}

impl Stream {
    pub fn new(
        input: Vec<f64>,
        target: Vec<f64>,
        params: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if input.len() != target.len() {
            return Err(Error::Dimension(format!(
                "stream input has {} samples, target {}",
                input.len(),
                target.len()
            )));
        }
        Ok(Self {
            input,
            target,
            params,
            label: label.into(),
        })
    }

    fn segments(&self, len: usize) -> usize {
        self.input.len() / len
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_esr: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stop_reason: String,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|e| &self.epochs[e])
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights of the epoch with the lowest validation loss.
    pub model: Model,
    pub history: TrainHistory,
    /// Set when training stopped on a non-finite loss or gradient.
    pub diverged: Option<String>,
}

struct ValStats {
    mse: f64,
    esr: f64,
}

fn validate(model: &Model, streams: &[Stream]) -> Result<ValStats> {
    let parts: Vec<Result<(f64, f64, usize)>> = streams
        .par_iter()
        .map(|s| {
            let y = model.forward_segment(&mut model.initial_state(), &s.input, &s.params)?;
            let mut err = 0.0;
            let mut energy = 0.0;
            for (a, b) in y.iter().zip(&s.target) {
                err += (a - b) * (a - b);
                energy += b * b;
            }
            Ok((err, energy, y.len()))
        })
        .collect();
    let (mut err, mut energy, mut n) = (0.0, 0.0, 0usize);
    for p in parts {
        let (e, s, c) = p?;
        err += e;
        energy += s;
        n += c;
    }
    if n == 0 {
        return Err(Error::Input("validation set is empty".into()));
    }
    Ok(ValStats {
        mse: err / n as f64,
        esr: if energy > 0.0 { err / energy } else { f64::NAN },
    })
}

/// Runs one epoch of stateful truncated backpropagation. Returns the mean
/// segment loss.
fn run_epoch(
    model: &mut Model,
    train: &[Stream],
    order: &[usize],
    cfg: &TrainConfig,
    lr: f64,
    moments: &mut AdamMoments,
) -> Result<f64> {
    let seg = cfg.segment_len;
    let adam = AdamConfig::default();
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    for batch in order.chunks(cfg.batch_size) {
        let mut states: Vec<ModelState> = batch.iter().map(|_| model.initial_state()).collect();
        let n_steps = batch
            .iter()
            .map(|&i| train[i].segments(seg))
            .max()
            .unwrap_or(0);
        for s in 0..n_steps {
            let current: &Model = model;
            let results: Vec<Option<Result<(f64, GradientSet)>>> = batch
                .par_iter()
                .zip(states.par_iter_mut())
                .map(|(&i, st)| {
                    let stream = &train[i];
                    (s < stream.segments(seg)).then(|| {
                        let r = s * seg..(s + 1) * seg;
                        backward_segment(
                            current,
                            st,
                            &stream.input[r.clone()],
                            &stream.target[r],
                            &stream.params,
                        )
                    })
                })
                .collect();
            let mut total: Option<GradientSet> = None;
            let mut count = 0usize;
            for r in results.into_iter().flatten() {
                let (loss, g) = r?;
                loss_sum += loss;
                loss_n += 1;
                count += 1;
                match &mut total {
                    Some(t) => t.add_assign(&g),
                    None => total = Some(g),
                }
            }
            let Some(mut g) = total else { continue };
            g.scale(1.0 / count as f64);
            clip_grad_norm(&mut g, cfg.clip_norm);
            adam_update(model.weights_mut(), &g, moments, lr, &adam)?;
            model.refresh()?;
        }
    }
    if loss_n == 0 {
        return Err(Error::Input(format!(
            "no training stream holds a full {seg}-sample segment"
        )));
    }
    Ok(loss_sum / loss_n as f64)
}

/// Trains `model` with early stopping on validation MSE.
pub fn train(
    mut model: Model,
    train: &[Stream],
    validation: &[Stream],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let p = model.config().cond_dim;
    if let Some(s) = train.iter().chain(validation).find(|s| s.params.len() != p) {
        return Err(Error::Compatibility(format!(
            "stream '{}' has {} conditioning values, model expects {p}",
            s.label,
            s.params.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut moments = AdamMoments::new(model.weights().num_scalars());
    let mut history = TrainHistory::default();
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut diverged = None;

    for epoch in 0..cfg.max_epochs {
        let lr = lr_at_epoch(cfg, epoch);
        order.shuffle(&mut rng);
        let train_loss = match run_epoch(&mut model, train, &order, cfg, lr, &mut moments) {
            Ok(l) => l,
            Err(e @ (Error::Numeric(_) | Error::Stability(_))) => {
                log::warn!("epoch {epoch}: training diverged: {e}");
                diverged = Some(e.to_string());
                history.stop_reason = "diverged".into();
                break;
            }
            Err(e) => return Err(e),
        };
        let val = validate(&model, validation)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val.mse,
            val_esr: val.esr,
            lr,
        });
        log::info!(
            "epoch {epoch}: train {train_loss:.3e} val {:.3e} esr {:.3e} lr {lr:.2e}",
            val.mse,
            val.esr
        );
        if val.mse < best_loss {
            best_loss = val.mse;
            best = model.clone();
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.target_val_esr.is_some_and(|t| val.esr < t) {
            history.stop_reason = "target validation ESR reached".into();
            break;
        }
        if since_best > 0 && since_best >= cfg.patience {
            history.stop_reason = format!("no validation improvement for {since_best} epochs");
            break;
        }
    }
    if history.stop_reason.is_empty() {
        history.stop_reason = "epoch budget exhausted".into();
    }
    Ok(TrainOutcome {
        model: best,
        history,
        diverged,
    })
}

/// Per-epoch CSV: `epoch,train_loss,val_loss,val_esr,lr`.
pub fn write_history_csv(history: &TrainHistory, path: &Path) -> Result<()> {
    let mut s = String::from("epoch,train_loss,val_loss,val_esr,lr\n");
    for e in &history.epochs {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e}",
            e.epoch, e.train_loss, e.val_loss, e.val_esr, e.lr
        );
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
