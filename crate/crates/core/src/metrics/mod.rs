//! Time-domain and spectral error measures, plus plot data.

mod report;

pub use report::{parse_eval_csv, write_eval_csv, EvalRow, EVAL_CSV_HEADER};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{hann_window, stft_mag, PreciseDft, Spectrogram, WindowKind};

/// Floor applied to any target magnitude used as a divisor or logged.
pub const MAG_FLOOR: f64 = 1e-7;
pub const SF_WINDOW: usize = 2048;
pub const SF_HOP: usize = 512;
/// Flux entries below this fraction of their bin magnitude are recomputed
/// in double-double precision.
pub const SF_REFINE: f64 = 1e-3;
pub const STFT_RESOLUTIONS: [usize; 3] = [256, 512, 1024];
/// Each multi-resolution STFT uses hop `m / STFT_HOP_DIVISOR`.
pub const STFT_HOP_DIVISOR: usize = 4;
pub const RMS_WINDOW: usize = 4096;
pub const RMS_OVERLAP: f64 = 0.75;
pub const SPEC_WINDOW: usize = 2048;
pub const SPEC_OVERLAP: f64 = 0.25;

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::Dimension(format!(
            "target has {} samples, prediction {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Input("empty signal".into()));
    }
    Ok(())
}

fn sums(y: &[f64], y_hat: &[f64]) -> (f64, f64) {
    y.iter().zip(y_hat).fold((0.0, 0.0), |(err, en), (a, b)| {
        (err + (a - b) * (a - b), en + a * a)
    })
}

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok(sums(y, y_hat).0 / y.len() as f64)
}

/// Error-to-signal ratio `sum (y - y_hat)^2 / sum y^2`.
pub fn esr(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let (err, energy) = sums(y, y_hat);
    if energy == 0.0 {
        return Err(Error::UndefinedMetric("ESR of an all-zero target".into()));
    }
    Ok(err / energy)
}

/// RMS of the error divided by RMS of the target.
pub fn nrmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let n = y.len() as f64;
    let (err, energy) = sums(y, y_hat);
    if energy == 0.0 {
        return Err(Error::UndefinedMetric("NRMSE of an all-zero target".into()));
    }
    Ok((err / n).sqrt() / (energy / n).sqrt())
}

/// Spectral-flux error.
///
/// With `F = |S_n - S_{n-1}|` per bin (window 2048, hop 512, Hann), returns
/// the mean over all `(frames - 1) x bins` entries of
/// `|F_y - F_y_hat| / max(F_y, 1e-7)`.
pub fn spectral_flux_metric(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    if y.len() < 2 * SF_WINDOW {
        return Err(Error::Input(format!(
            "spectral flux needs at least {} samples, got {}",
            2 * SF_WINDOW,
            y.len()
        )));
    }
    let sy = stft_mag(y, SF_WINDOW, SF_HOP, WindowKind::Hann)?;
    let sp = stft_mag(y_hat, SF_WINDOW, SF_HOP, WindowKind::Hann)?;
    let precise = PreciseDft::new(SF_WINDOW);
    let window = hann_window(SF_WINDOW);
    let exact_flux = |x: &[f64], f: usize, k: usize| {
        let mag = |g: usize| precise.magnitude(&x[g * SF_HOP..g * SF_HOP + SF_WINDOW], &window, k);
        f64::from((mag(f) - mag(f - 1)).abs())
    };
    let mut acc = 0.0;
    for f in 1..sy.frames {
        let (a0, a1) = (sy.frame(f - 1), sy.frame(f));
        let (b0, b1) = (sp.frame(f - 1), sp.frame(f));
        for k in 0..sy.bins {
            let mut fy = (a1[k] - a0[k]).abs();
            let mut fp = (b1[k] - b0[k]).abs();
            if fy < SF_REFINE * a1[k].max(a0[k]) {
                fy = exact_flux(y, f, k);
                fp = exact_flux(y_hat, f, k);
            }
            acc += (fy - fp).abs() / fy.max(MAG_FLOOR);
        }
    }
    Ok(acc / ((sy.frames - 1) * sy.bins) as f64)
}

/// Multi-resolution STFT distance.
///
/// For each `m` in 256, 512, 1024 (hop `m/4`, Hann) adds the mean of
/// `|S_y - S_y_hat| / max(S_y, 1e-7)` and the mean of
/// `|log max(S_y, 1e-7) - log max(S_y_hat, 1e-7)|` over that resolution's
/// `frames x bins` entries.
pub fn multires_stft_metric(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let longest = STFT_RESOLUTIONS[STFT_RESOLUTIONS.len() - 1];
    if y.len() < longest {
        return Err(Error::Input(format!(
            "multi-resolution STFT needs at least {longest} samples, got {}",
            y.len()
        )));
    }
    let mut total = 0.0;
    for m in STFT_RESOLUTIONS {
        let sy = stft_mag(y, m, m / STFT_HOP_DIVISOR, WindowKind::Hann)?;
        let sp = stft_mag(y_hat, m, m / STFT_HOP_DIVISOR, WindowKind::Hann)?;
        let (mut lin, mut log) = (0.0, 0.0);
        for (a, b) in sy.magnitudes().iter().zip(sp.magnitudes()) {
            let a_f = a.max(MAG_FLOOR);
            lin += (a - b).abs() / a_f;
            log += (a_f.ln() - b.max(MAG_FLOOR).ln()).abs();
        }
        let n = sy.magnitudes().len() as f64;
        total += lin / n + log / n;
    }
    Ok(total)
}

fn hop_for(window: usize, overlap: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Input(format!("overlap {overlap} outside [0, 1)")));
    }
    Ok(((window as f64 * (1.0 - overlap)).round() as usize).max(1))
}

/// Frame-wise RMS (`window` samples, given fractional overlap).
pub fn rms_energy_track(y: &[f64], window: usize, overlap: f64) -> Result<Vec<f64>> {
    let hop = hop_for(window, overlap)?;
    if window == 0 || y.len() < window {
        return Err(Error::Input(format!(
            "RMS track needs at least {window} samples, got {}",
            y.len()
        )));
    }
    let frames = (y.len() - window) / hop + 1;
    Ok((0..frames)
        .map(|f| {
            let s = &y[f * hop..f * hop + window];
            (s.iter().map(|v| v * v).sum::<f64>() / window as f64).sqrt()
        })
        .collect())
}

/// Hann magnitude spectrogram for plotting.
pub fn spectrogram_report(y: &[f64], window: usize, overlap: f64) -> Result<Spectrogram> {
    stft_mag(y, window, hop_for(window, overlap)?, WindowKind::Hann)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub mse: f64,
    pub esr: f64,
    pub nrmse: f64,
    pub m_sf: f64,
    pub m_stft: f64,
    pub sf_window: usize,
    pub sf_hop: usize,
    pub stft_resolutions: Vec<usize>,
    pub stft_hop_divisor: usize,
}

impl MetricReport {
    pub fn evaluate(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        Ok(Self {
            mse: mse(y, y_hat)?,
            esr: esr(y, y_hat)?,
            nrmse: nrmse(y, y_hat)?,
            m_sf: spectral_flux_metric(y, y_hat)?,
            m_stft: multires_stft_metric(y, y_hat)?,
            sf_window: SF_WINDOW,
            sf_hop: SF_HOP,
            stft_resolutions: STFT_RESOLUTIONS.to_vec(),
            stft_hop_divisor: STFT_HOP_DIVISOR,
        })
    }

    /// Element-wise mean of the five metrics.
    pub fn mean(reports: &[MetricReport]) -> Option<Self> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(Self {
            mse: avg(|r| r.mse),
            esr: avg(|r| r.esr),
            nrmse: avg(|r| r.nrmse),
            m_sf: avg(|r| r.m_sf),
            m_stft: avg(|r| r.m_stft),
            ..first.clone()
        })
    }
}
