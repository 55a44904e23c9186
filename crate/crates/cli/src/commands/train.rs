use std::path::PathBuf;

use vastate::model::{save_checkpoint, Architecture, Checkpoint, Model, ModelConfig};
use vastate::training::{train as run_training, write_history_csv, TrainConfig};

use super::load_composition;
use crate::error::{usage, CliResult};
use crate::manifest::{create_dir, read_to_string, write, RunManifest};

pub const CHECKPOINT_FILE: &str = "model.vackpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "train_config.txt";

pub struct TrainArgs {
    pub arch: Architecture,
    pub dataset: PathBuf,
    pub composition: usize,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub max_epochs: Option<usize>,
    pub seed: Option<u64>,
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("train");
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::parse(&read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    manifest.config_path = a.config.clone();
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(n) = a.max_epochs {
        cfg.max_epochs = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    manifest.seed = Some(cfg.seed);

    let (ds, streams) = load_composition(&a.dataset, a.composition)?;
    let config = ModelConfig {
        architecture: a.arch,
        cond_dim: ds.cond_dim(),
        sample_rate: ds.sample_rate,
    };
    let model = Model::init(config, cfg.seed)?;
    log::info!(
        "training {} ({} parameters) on {} composition {}: {} train / {} validation streams",
        a.arch,
        model.count_params(),
        ds.effect,
        a.composition,
        streams.train.len(),
        streams.validation.len()
    );
    let outcome = run_training(model, &streams.train, &streams.validation, &cfg)?;

    create_dir(&a.out)?;
    let h = &outcome.history;
    let mut ckpt = Checkpoint::from_model(&outcome.model);
    ckpt.train_loss = h.epochs.iter().map(|e| e.train_loss).collect();
    ckpt.val_loss = h.epochs.iter().map(|e| e.val_loss).collect();
    ckpt.lr = h.epochs.iter().map(|e| e.lr).collect();
    ckpt.best_epoch = h.best_epoch;
    ckpt.meta.insert("effect".into(), ds.effect.to_string());
    ckpt.meta
        .insert("dataset".into(), a.dataset.display().to_string());
    ckpt.meta
        .insert("composition".into(), a.composition.to_string());
    ckpt.meta
        .insert("stop_reason".into(), h.stop_reason.clone());
    if let Some(d) = &outcome.diverged {
        ckpt.meta.insert("diverged".into(), d.clone());
    }
    let ck = a.out.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, &ck)?;
    let hist = a.out.join(HISTORY_FILE);
    write_history_csv(h, &hist)?;
    let conf = a.out.join(CONFIG_FILE);
    write(&conf, cfg.to_text().as_bytes())?;
    for p in [&ck, &hist, &conf] {
        manifest.add(&a.out, p);
    }
    manifest.finish(&a.out)?;
    match h.best() {
        Some(b) => log::info!(
            "{}: best epoch {} val loss {:.3e} val ESR {:.3e} ({})",
            a.arch,
            b.epoch,
            b.val_loss,
            b.val_esr,
            h.stop_reason
        ),
        None => log::warn!("{}: no completed epoch ({})", a.arch, h.stop_reason),
    }
    Ok(())
}
