use std::path::PathBuf;

use vastate::data::{combination_stem, save_wav};
use vastate::metrics::{write_eval_csv, EvalRow, MetricReport};
use vastate::model::load_checkpoint;
use vastate::Error;

use super::load_composition;
use crate::error::CliResult;
use crate::manifest::{create_dir, write, RunManifest};

pub const EVAL_FILE: &str = "eval.csv";

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub composition: usize,
    pub out: PathBuf,
    pub split: String,
    pub name: Option<String>,
    pub save_predictions: bool,
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("eval");
    let model = load_checkpoint(&a.checkpoint)?.to_model()?;
    let (ds, streams) = load_composition(&a.dataset, a.composition)?;
    if ds.cond_dim() != model.config().cond_dim {
        return Err(Error::Compatibility(format!(
            "checkpoint expects {} conditioning values, dataset provides {}",
            model.config().cond_dim,
            ds.cond_dim()
        ))
        .into());
    }
    let split = if a.split == "validation" {
        &streams.validation
    } else {
        &streams.test
    };
    let dataset_name = a.name.clone().unwrap_or_else(|| {
        a.dataset
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| ds.effect.to_string())
    });
    create_dir(&a.out)?;
    let mut rows = Vec::new();
    for (i, s) in split.iter().enumerate() {
        let pred = model.forward_segment(&mut model.initial_state(), &s.input, &s.params)?;
        if a.save_predictions {
            let p = a
                .out
                .join(format!("{}.{}.pred.wav", combination_stem(i), a.split));
            save_wav(&p, &pred)?;
            manifest.add(&a.out, &p);
        }
        rows.push(EvalRow {
            model: model.architecture().to_string(),
            dataset: dataset_name.clone(),
            composition: a.composition,
            split: a.split.clone(),
            combination: i.to_string(),
            report: MetricReport::evaluate(&s.target, &pred)?,
        });
    }
    let reports: Vec<MetricReport> = rows.iter().map(|r| r.report.clone()).collect();
    if let Some(mean) = MetricReport::mean(&reports) {
        log::info!(
            "{} on {dataset_name} composition {}: ESR {:.4e}, M_SF {:.4e}, M_STFT {:.4e}",
            model.architecture(),
            a.composition,
            mean.esr,
            mean.m_sf,
            mean.m_stft
        );
        rows.push(EvalRow {
            combination: "mean".into(),
            report: mean,
            ..rows[0].clone()
        });
    }
    let path = a.out.join(EVAL_FILE);
    write(&path, write_eval_csv(&rows)?.as_bytes())?;
    manifest.add(&a.out, &path);
    manifest.finish(&a.out)?;
    Ok(())
}
