use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of equal blocks in a generated recording. Each ends in silence.
pub const BLOCKS: usize = 10;
/// Fraction of each block left silent at its end.
pub const SILENCE_FRACTION: f64 = 1.0 / 45.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    LogSweep,
    LinearNoise,
    LogNoise,
    Tones,
}

/// Block layout: sweep, noise ramps and tone material, cycling.
pub const BLOCK_ORDER: [BlockKind; BLOCKS] = [
    BlockKind::LogSweep,
    BlockKind::LinearNoise,
    BlockKind::LogNoise,
    BlockKind::Tones,
    BlockKind::LogSweep,
    BlockKind::Tones,
    BlockKind::LinearNoise,
    BlockKind::LogNoise,
    BlockKind::Tones,
    BlockKind::LogSweep,
];

const SWEEP_LO: f64 = 20.0;
const SWEEP_HI: f64 = 20_000.0;
const FADE_S: f64 = 0.005;

fn log_sweep(n: usize, fs: f64, amp: f64) -> Vec<f64> {
    let t_total = n as f64 / fs;
    let k = (SWEEP_HI / SWEEP_LO).ln();
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let phase = 2.0 * PI * SWEEP_LO * t_total / k * ((t / t_total * k).exp() - 1.0);
            amp * phase.sin()
        })
        .collect()
}

fn noise_ramp(n: usize, rng: &mut ChaCha8Rng, log: bool) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let r = i as f64 / n as f64;
            // log ramp climbs from -60 dB to 0 dB
            let env = if log { 10f64.powf(3.0 * (r - 1.0)) } else { r };
            env * rng.random_range(-1.0..1.0)
        })
        .collect()
}

fn tones(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let note = (0.55 * fs) as usize;
    let mut start = 0;
    while start < n {
        let f0 = 55.0 * 2f64.powf(rng.random_range(0.0..4.5));
        let amp = rng.random_range(0.2..0.6);
        let decay = rng.random_range(2.0..9.0);
        let harmonics = [1.0, 0.5, 0.3, 0.15];
        for (i, v) in out[start..].iter_mut().take(2 * note).enumerate() {
            let t = i as f64 / fs;
            let env = (-decay * t).exp() * (1.0 - (-t * 400.0).exp());
            let s: f64 = harmonics
                .iter()
                .enumerate()
                .filter(|(h, _)| f0 * (*h as f64 + 1.0) < 0.45 * fs)
                .map(|(h, a)| a * (2.0 * PI * f0 * (h as f64 + 1.0) * t).sin())
                .sum();
            *v += amp * env * s / 1.95;
        }
        start += note;
    }
    out
}

fn fade(x: &mut [f64], len: usize) {
    let len = len.min(x.len() / 2);
    let n = x.len();
    for i in 0..len {
        let g = i as f64 / len as f64;
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
}

/// Deterministic excitation signal of `duration_s` seconds.
///
/// Ten equal blocks (log sweep 20 Hz to 20 kHz, linear and logarithmic
/// white-noise ramps, decaying harmonic tones), each followed by silence.
/// When `material` is given, tone blocks take consecutive slices of it
/// instead. Peak amplitude never exceeds 1.
pub fn generate_input_signal(
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
    material: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let fs = f64::from(sample_rate);
    let total = (duration_s * fs).round() as usize;
    if !(duration_s > 0.0) || total < BLOCKS * 64 {
        return Err(Error::Input(format!(
            "duration {duration_s} s is too short"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    let mut material_pos = 0;
    for (b, kind) in BLOCK_ORDER.iter().enumerate() {
        let block_len = (b + 1) * total / BLOCKS - b * total / BLOCKS;
        let silence = (block_len as f64 * SILENCE_FRACTION).round() as usize;
        let active = block_len - silence;
        let mut x = match kind {
            BlockKind::LogSweep => log_sweep(active, fs, 0.7),
            BlockKind::LinearNoise => noise_ramp(active, &mut rng, false),
            BlockKind::LogNoise => noise_ramp(active, &mut rng, true),
            BlockKind::Tones => match material.filter(|m| !m.is_empty()) {
                Some(m) => {
                    let v = (0..active)
                        .map(|i| m[(material_pos + i) % m.len()])
                        .collect();
                    material_pos += active;
                    v
                }
                None => tones(active, fs, &mut rng),
            },
        };
        fade(&mut x, (FADE_S * fs) as usize);
        out.extend(x.into_iter().map(|v| v.clamp(-1.0, 1.0)));
        out.extend(std::iter::repeat_n(0.0, silence));
    }
    Ok(out)
}
