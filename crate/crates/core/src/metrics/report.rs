use std::fmt::Write as _;

use super::{MetricReport, SF_HOP, SF_WINDOW, STFT_HOP_DIVISOR, STFT_RESOLUTIONS};
use crate::error::{Error, Result};

pub const EVAL_CSV_HEADER: &str =
    "model,dataset,composition,split,combination,mse,esr,nrmse,m_sf,m_stft";

/// One line of an evaluation table. Aggregate lines use `combination = "mean"`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub model: String,
    pub dataset: String,
    pub composition: usize,
    pub split: String,
    pub combination: String,
    pub report: MetricReport,
}

fn check_field(s: &str) -> Result<()> {
    if s.contains([',', '\n', '\r', '"']) {
        return Err(Error::Input(format!(
            "CSV field '{s}' contains a delimiter or quote"
        )));
    }
    Ok(())
}

pub fn write_eval_csv(rows: &[EvalRow]) -> Result<String> {
    let mut s = String::from(EVAL_CSV_HEADER);
    s.push('\n');
    for r in rows {
        for f in [&r.model, &r.dataset, &r.split, &r.combination] {
            check_field(f)?;
        }
        let m = &r.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            r.model,
            r.dataset,
            r.composition,
            r.split,
            r.combination,
            m.mse,
            m.esr,
            m.nrmse,
            m.m_sf,
            m.m_stft
        );
    }
    Ok(s)
}

fn num(field: &str, line: usize, name: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: bad {name} value '{field}'")))
}

pub fn parse_eval_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == EVAL_CSV_HEADER => {}
        _ => return Err(Error::Format("missing evaluation CSV header".into())),
    }
    lines
        .map(|(i, l)| {
            let line = i + 1;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(Error::Format(format!(
                    "line {line}: expected 10 fields, got {}",
                    f.len()
                )));
            }
            let composition = f[2]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: bad composition '{}'", f[2])))?;
            Ok(EvalRow {
                model: f[0].trim().to_string(),
                dataset: f[1].trim().to_string(),
                composition,
                split: f[3].trim().to_string(),
                combination: f[4].trim().to_string(),
                report: MetricReport {
                    mse: num(f[5], line, "mse")?,
                    esr: num(f[6], line, "esr")?,
                    nrmse: num(f[7], line, "nrmse")?,
                    m_sf: num(f[8], line, "m_sf")?,
                    m_stft: num(f[9], line, "m_stft")?,
                    sf_window: SF_WINDOW,
                    sf_hop: SF_HOP,
                    stft_resolutions: STFT_RESOLUTIONS.to_vec(),
                    stft_hop_divisor: STFT_HOP_DIVISOR,
                },
            })
        })
        .collect()
}
