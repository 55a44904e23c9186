//! Synthetic reference effects with exact ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Identity,
    WaveshaperOverdrive,
    TapeSaturator,
    ResonantLowpass,
    FeedforwardCompressor,
    PeakingEq,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    /// Normalized on a logarithmic axis.
    pub log: bool,
}

impl ParamSpec {
    const fn lin(name: &'static str, min: f64, max: f64) -> Self {
        Self {
            name,
            min,
            max,
            log: false,
        }
    }

    const fn log(name: &'static str, min: f64, max: f64) -> Self {
        Self {
            name,
            min,
            max,
            log: true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    /// Maps a physical value in range to [0, 1].
    pub fn normalize(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Input(format!(
                "{} = {x} outside [{}, {}]",
                self.name, self.min, self.max
            )));
        }
        Ok(if self.log {
            (x / self.min).ln() / (self.max / self.min).ln()
        } else {
            (x - self.min) / (self.max - self.min)
        })
    }

    pub fn denormalize(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Input(format!(
                "normalized {} = {p} outside [0, 1]",
                self.name
            )));
        }
        Ok(if self.log {
            self.min * (self.max / self.min).powf(p)
        } else {
            self.min + p * (self.max - self.min)
        }
        .clamp(self.min, self.max))
    }
}

/// Highest lowpass cutoff as a fraction of the sample rate.
pub const LOWPASS_MAX_CUTOFF_RATIO: f64 = 0.4995;

const WAVESHAPER: [ParamSpec; 2] = [
    ParamSpec::log("drive", 1.0, 50.0),
    ParamSpec::log("tone_hz", 1_500.0, 16_000.0),
];
const TAPE: [ParamSpec; 2] = [
    ParamSpec::log("drive", 1.0, 20.0),
    ParamSpec::lin("emphasis", 0.0, 0.5),
];
const LOWPASS: [ParamSpec; 2] = [
    ParamSpec::log("cutoff_hz", 100.0, LOWPASS_MAX_CUTOFF_RATIO * 48_000.0),
    ParamSpec::log("resonance_q", 0.5, 8.0),
];
const COMPRESSOR: [ParamSpec; 4] = [
    ParamSpec::lin("threshold_db", -40.0, 0.0),
    ParamSpec::log("ratio", 1.0, 20.0),
    ParamSpec::log("attack_s", 0.005, 0.3),
    ParamSpec::log("release_s", 0.005, 10.0),
];
const PEAKING: [ParamSpec; 3] = [
    ParamSpec::log("freq_hz", 50.0, 15_000.0),
    ParamSpec::lin("gain_db", -15.0, 15.0),
    ParamSpec::log("q", 0.3, 5.0),
];

impl OracleKind {
    pub const ALL: [OracleKind; 6] = [
        OracleKind::Identity,
        OracleKind::WaveshaperOverdrive,
        OracleKind::TapeSaturator,
        OracleKind::ResonantLowpass,
        OracleKind::FeedforwardCompressor,
        OracleKind::PeakingEq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Identity => "identity",
            OracleKind::WaveshaperOverdrive => "waveshaper_overdrive",
            OracleKind::TapeSaturator => "tape_saturator",
            OracleKind::ResonantLowpass => "resonant_lowpass",
            OracleKind::FeedforwardCompressor => "feedforward_compressor",
            OracleKind::PeakingEq => "peaking_eq",
        }
    }

    /// Physical parameter ranges, at 48 kHz.
    pub fn param_specs(self) -> &'static [ParamSpec] {
        match self {
            OracleKind::Identity => &[],
            OracleKind::WaveshaperOverdrive => &WAVESHAPER,
            OracleKind::TapeSaturator => &TAPE,
            OracleKind::ResonantLowpass => &LOWPASS,
            OracleKind::FeedforwardCompressor => &COMPRESSOR,
            OracleKind::PeakingEq => &PEAKING,
        }
    }

    pub fn normalize(self, physical: &[f64]) -> Result<Vec<f64>> {
        self.check_len(physical)?;
        self.param_specs()
            .iter()
            .zip(physical)
            .map(|(s, &x)| s.normalize(x))
            .collect()
    }

    pub fn denormalize(self, normalized: &[f64]) -> Result<Vec<f64>> {
        self.check_len(normalized)?;
        self.param_specs()
            .iter()
            .zip(normalized)
            .map(|(s, &p)| s.denormalize(p))
            .collect()
    }

    fn check_len(self, v: &[f64]) -> Result<()> {
        let n = self.param_specs().len();
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "{} takes {n} parameters, got {}",
                self.name(),
                v.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OracleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown effect '{s}'")))
    }
}

/// One-pole lowpass `y += a (x - y)` matched to a cutoff frequency.
struct OnePole {
    a: f64,
    y: f64,
}

impl OnePole {
    fn new(cutoff: f64, fs: f64) -> Self {
        Self {
            a: 1.0 - (-2.0 * PI * cutoff / fs).exp(),
            y: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        self.y += self.a * (x - self.y);
        self.y
    }
}

fn waveshaper(x: &[f64], drive: f64, tone: f64, fs: f64) -> Vec<f64> {
    let mut lp = OnePole::new(tone, fs);
    x.iter().map(|&v| lp.tick((drive * v).tanh())).collect()
}

fn tape(x: &[f64], drive: f64, emphasis: f64) -> Vec<f64> {
    let norm = drive.tanh();
    let (mut px, mut dy) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let pre = v - emphasis * px;
            px = v;
            let s = (drive * pre).tanh() / norm;
            dy = s + emphasis * dy;
            dy
        })
        .collect()
}

/// Trapezoidal state-variable filter, lowpass output.
fn svf_lowpass(x: &[f64], cutoff: f64, q: f64, fs: f64) -> Vec<f64> {
    let g = (PI * cutoff / fs).tan();
    let k = 1.0 / q;
    let a1 = 1.0 / (1.0 + g * (g + k));
    let a2 = g * a1;
    let a3 = g * a2;
    let (mut ic1, mut ic2) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let v3 = v - ic2;
            let v1 = a1 * ic1 + a2 * v3;
            let v2 = ic2 + a2 * ic1 + a3 * v3;
            ic1 = 2.0 * v1 - ic1;
            ic2 = 2.0 * v2 - ic2;
            v2
        })
        .collect()
}

fn compressor(x: &[f64], p: &[f64], fs: f64) -> Vec<f64> {
    let (threshold, ratio, attack, release) = (p[0], p[1], p[2], p[3]);
    let ca = (-1.0 / (attack * fs)).exp();
    let cr = (-1.0 / (release * fs)).exp();
    let mut env = 0.0f64;
    x.iter()
        .map(|&v| {
            let level = v.abs();
            let c = if level > env { ca } else { cr };
            env = c * env + (1.0 - c) * level;
            let env_db = 20.0 * env.max(1e-9).log10();
            let over = env_db - threshold;
            let reduction = if over > 0.0 {
                over * (1.0 - 1.0 / ratio)
            } else {
                0.0
            };
            v * 10f64.powf(-reduction / 20.0)
        })
        .collect()
}

/// Peaking biquad in transposed direct form II.
fn peaking(x: &[f64], freq: f64, gain_db: f64, q: f64, fs: f64) -> Vec<f64> {
    let a = 10f64.powf(gain_db / 40.0);
    let w = 2.0 * PI * freq / fs;
    let alpha = w.sin() / (2.0 * q);
    let a0 = 1.0 + alpha / a;
    let b = [
        (1.0 + alpha * a) / a0,
        -2.0 * w.cos() / a0,
        (1.0 - alpha * a) / a0,
    ];
    let den = [-2.0 * w.cos() / a0, (1.0 - alpha / a) / a0];
    let (mut z1, mut z2) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let y = b[0] * v + z1;
            z1 = b[1] * v - den[0] * y + z2;
            z2 = b[2] * v - den[1] * y;
            y
        })
        .collect()
}

/// Runs an effect over `input` with physical parameter values.
pub fn apply_oracle(
    kind: OracleKind,
    physical: &[f64],
    input: &[f64],
    sample_rate: u32,
) -> Result<Vec<f64>> {
    kind.normalize(physical)?;
    let fs = f64::from(sample_rate);
    let p = physical;
    Ok(match kind {
        OracleKind::Identity => input.to_vec(),
        OracleKind::WaveshaperOverdrive => waveshaper(input, p[0], p[1].min(0.45 * fs), fs),
        OracleKind::TapeSaturator => tape(input, p[0], p[1]),
        OracleKind::ResonantLowpass => {
            svf_lowpass(input, p[0].min(LOWPASS_MAX_CUTOFF_RATIO * fs), p[1], fs)
        }
        OracleKind::FeedforwardCompressor => compressor(input, p, fs),
        OracleKind::PeakingEq => peaking(input, p[0].min(0.45 * fs), p[1], p[2], fs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64, amp: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect()
    }

    fn mid(kind: OracleKind) -> Vec<f64> {
        kind.denormalize(&vec![0.5; kind.param_specs().len()])
            .unwrap()
    }

    #[test]
    fn identity_passes_through() {
        let x = noise(1000, 1, 1.0);
        assert_eq!(
            apply_oracle(OracleKind::Identity, &[], &x, 48_000).unwrap(),
            x
        );
    }

    #[test]
    fn waveshaper_linear_regime() {
        let x = noise(4000, 2, 0.01);
        let tone = 8000.0;
        let y = apply_oracle(OracleKind::WaveshaperOverdrive, &[1.0, tone], &x, 48_000).unwrap();
        let mut lp = OnePole::new(tone, 48_000.0);
        for (a, &v) in y.iter().zip(&x) {
            assert!((a - lp.tick(v)).abs() < 1e-3 * 0.01);
        }
    }

    #[test]
    fn lowpass_at_max_cutoff_is_transparent() {
        let fs = 48_000.0;
        let x: Vec<f64> = (0..48_000)
            .map(|i| {
                let t = i as f64 / fs;
                0.3 * (2.0 * PI * 110.0 * t).sin()
                    + 0.2 * (2.0 * PI * 950.0 * t).sin()
                    + 0.1 * (2.0 * PI * 3100.0 * t).sin()
            })
            .collect();
        let y = apply_oracle(
            OracleKind::ResonantLowpass,
            &[LOWPASS_MAX_CUTOFF_RATIO * fs, 0.5],
            &x,
            48_000,
        )
        .unwrap();
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let en: f64 = x.iter().map(|a| a * a).sum();
        assert!(
            10.0 * (err / en).log10() < -60.0,
            "{}",
            10.0 * (err / en).log10()
        );
    }

    #[test]
    fn peaking_eq_zero_gain_is_identity() {
        let x = noise(2000, 3, 0.8);
        let y = apply_oracle(OracleKind::PeakingEq, &[1000.0, 0.0, 1.0], &x, 48_000).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn compressor_ratio_one_is_identity() {
        let x = noise(2000, 4, 0.8);
        let y = apply_oracle(
            OracleKind::FeedforwardCompressor,
            &[-30.0, 1.0, 0.01, 0.1],
            &x,
            48_000,
        )
        .unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
        let z = apply_oracle(
            OracleKind::FeedforwardCompressor,
            &[-30.0, 20.0, 0.005, 0.1],
            &x,
            48_000,
        )
        .unwrap();
        assert!(
            z[1000..].iter().map(|v| v.abs()).sum::<f64>()
                < x[1000..].iter().map(|v| v.abs()).sum::<f64>()
        );
    }

    #[test]
    fn oracles_are_causal() {
        let x = noise(3000, 5, 0.9);
        for kind in OracleKind::ALL {
            let p = mid(kind);
            let full = apply_oracle(kind, &p, &x, 48_000).unwrap();
            let prefix = apply_oracle(kind, &p, &x[..1700], 48_000).unwrap();
            assert_eq!(&full[..1700], &prefix[..], "{kind}");
            assert!(full.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn range_and_arity_errors() {
        let x = [0.0; 10];
        assert!(matches!(
            apply_oracle(
                OracleKind::WaveshaperOverdrive,
                &[100.0, 2000.0],
                &x,
                48_000
            ),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            apply_oracle(OracleKind::PeakingEq, &[1.0], &x, 48_000),
            Err(Error::Dimension(_))
        ));
        assert!("fuzz".parse::<OracleKind>().is_err());
        for k in OracleKind::ALL {
            assert_eq!(k.name().parse::<OracleKind>().unwrap(), k);
        }
    }

    #[test]
    fn normalization_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in OracleKind::ALL {
            for _ in 0..100 {
                let phys: Vec<f64> = kind
                    .param_specs()
                    .iter()
                    .map(|s| rng.random_range(s.min..=s.max))
                    .collect();
                let back = kind.denormalize(&kind.normalize(&phys).unwrap()).unwrap();
                for (a, b) in phys.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                }
            }
        }
    }
}
