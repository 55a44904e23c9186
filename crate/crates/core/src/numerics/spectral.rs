use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann, the default for every metric.
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hann => "hann",
            WindowKind::Rectangular => "rectangular",
        }
    }

    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => hann_window(n),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude spectrogram, frames are rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub window_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    magnitudes: Vec<f64>,
}

impl Spectrogram {
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        &self.magnitudes[f * self.bins..(f + 1) * self.bins]
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.magnitudes[frame * self.bins + bin]
    }
}

/// Magnitude STFT without centering or padding.
///
/// Frame `f` covers `signal[f*hop .. f*hop + window_size]`; there are
/// `floor((len - window_size) / hop) + 1` frames of `window_size/2 + 1` bins.
pub fn stft_mag(
    signal: &[f64],
    window_size: usize,
    hop: usize,
    window: WindowKind,
) -> Result<Spectrogram> {
    if window_size < 2 || hop == 0 {
        return Err(Error::Input(format!(
            "invalid STFT geometry: window {window_size}, hop {hop}"
        )));
    }
    if signal.len() < window_size {
        return Err(Error::Input(format!(
            "signal of {} samples is shorter than one {}-sample window",
            signal.len(),
            window_size
        )));
    }
    let frames = (signal.len() - window_size) / hop + 1;
    let bins = window_size / 2 + 1;
    let coeffs = window.coefficients(window_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); window_size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitudes = Vec::with_capacity(frames * bins);
    for f in 0..frames {
        let start = f * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(signal[start + i] * coeffs[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        magnitudes.extend(buf[..bins].iter().map(|z| z.norm()));
    }
    Ok(Spectrogram {
        frames,
        bins,
        window_size,
        hop,
        window,
        magnitudes,
    })
}

/// O(N^2) DFT magnitudes of one already-windowed frame, bins `0..=N/2`.
///
/// Slow; meant for cross-checking the FFT path.
pub fn dft_frame_direct(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..n / 2 + 1)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                // reduce the phase index exactly before converting to an angle
                let idx = (k * t) % n;
                let ang = -2.0 * PI * idx as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}
