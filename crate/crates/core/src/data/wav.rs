//! Minimal RIFF/WAVE codec for 48 kHz mono material.

use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 48_000;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Float32 => 32,
        }
    }

    fn tag(self) -> u16 {
        match self {
            SampleFormat::Float32 => FORMAT_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

/// Decoded file contents before the 48 kHz mono check.
#[derive(Clone, Debug, PartialEq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub format: SampleFormat,
    /// Interleaved samples scaled to [-1, 1].
    pub samples: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

struct Fmt {
    format: SampleFormat,
    channels: u16,
    sample_rate: u32,
}

fn parse_fmt(c: &[u8]) -> Result<Fmt> {
    if c.len() < 16 {
        return Err(bad(format!("fmt chunk of {} bytes is too short", c.len())));
    }
    let mut tag = u16_at(c, 0);
    let channels = u16_at(c, 2);
    let sample_rate = u32_at(c, 4);
    let block_align = u16_at(c, 12);
    let bits = u16_at(c, 14);
    if tag == FORMAT_EXTENSIBLE {
        if c.len() < 40 {
            return Err(bad("extensible fmt chunk is truncated"));
        }
        tag = u16_at(c, 24);
    }
    let format = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleFormat::Pcm16,
        (FORMAT_PCM, 24) => SampleFormat::Pcm24,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        _ => {
            return Err(bad(format!(
                "unsupported sample format: tag {tag}, {bits} bits (need 16/24-bit PCM or 32-bit float)"
            )))
        }
    };
    if channels == 0 {
        return Err(bad("zero channels"));
    }
    let expected = u32::from(channels) * u32::from(bits / 8);
    if u32::from(block_align) != expected {
        return Err(bad(format!(
            "block align {block_align}, expected {expected}"
        )));
    }
    Ok(Fmt {
        format,
        channels,
        sample_rate,
    })
}

/// Parses any supported WAV without checking rate or channel count.
pub fn decode_wav_info(bytes: &[u8]) -> Result<WavInfo> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut fmt: Option<Fmt> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                bad(format!(
                    "chunk '{}' overruns the file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[start..end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                let f = fmt.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                let width = usize::from(f.format.bits() / 8);
                if body.len() % (width * usize::from(f.channels)) != 0 {
                    return Err(bad("data chunk holds a partial frame"));
                }
                let samples = body
                    .chunks_exact(width)
                    .map(|s| match f.format {
                        SampleFormat::Pcm16 => {
                            f64::from(i16::from_le_bytes([s[0], s[1]])) / 32768.0
                        }
                        SampleFormat::Pcm24 => {
                            f64::from(i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8) / 8_388_608.0
                        }
                        SampleFormat::Float32 => {
                            f64::from(f32::from_le_bytes([s[0], s[1], s[2], s[3]]))
                        }
                    })
                    .collect::<Vec<f64>>();
                if samples.iter().any(|v| !v.is_finite()) {
                    return Err(bad("non-finite float sample"));
                }
                return Ok(WavInfo {
                    sample_rate: f.sample_rate,
                    channels: f.channels,
                    format: f.format,
                    samples,
                });
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(bad("no data chunk"))
}

/// Parses a 48 kHz mono WAV.
pub fn decode_wav(bytes: &[u8]) -> Result<Vec<f64>> {
    let info = decode_wav_info(bytes)?;
    if info.channels != 1 {
        return Err(bad(format!(
            "expected 1 channel, file has {}",
            info.channels
        )));
    }
    if info.sample_rate != SAMPLE_RATE {
        return Err(bad(format!(
            "expected {SAMPLE_RATE} Hz, file is {} Hz (resampling is not supported)",
            info.sample_rate
        )));
    }
    Ok(info.samples)
}

/// Encodes interleaved samples. Integer formats clamp to [-1, 1].
pub fn encode_wav(
    samples: &[f64],
    sample_rate: u32,
    channels: u16,
    format: SampleFormat,
) -> Vec<u8> {
    let width = usize::from(format.bits() / 8);
    let data_len = samples.len() * width;
    let mut out = Vec::with_capacity(44 + data_len + 1);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len + (data_len & 1)) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    let block = u32::from(channels) * width as u32;
    out.extend_from_slice(&(sample_rate * block).to_le_bytes());
    out.extend_from_slice(&(block as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &v in samples {
        match format {
            SampleFormat::Pcm16 => {
                let q = (v.clamp(-1.0, 1.0) * 32768.0)
                    .round()
                    .clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
            SampleFormat::Pcm24 => {
                let q = (v.clamp(-1.0, 1.0) * 8_388_608.0)
                    .round()
                    .clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&q.to_le_bytes()[..3]);
            }
            SampleFormat::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    out
}

pub fn load_wav(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes 48 kHz mono 32-bit float.
pub fn save_wav(path: &Path, samples: &[f64]) -> Result<()> {
    std::fs::write(
        path,
        encode_wav(samples, SAMPLE_RATE, 1, SampleFormat::Float32),
    )
    .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip() {
        let x: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.37).sin() * 0.9).collect();
        let y = decode_wav(&encode_wav(&x, SAMPLE_RATE, 1, SampleFormat::Float32)).unwrap();
        assert_eq!(y.len(), x.len());
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-7));
    }

    #[test]
    fn integer_quantization() {
        let x = [1.0, -1.0, 0.5, 0.0];
        let y16 = decode_wav(&encode_wav(&x, SAMPLE_RATE, 1, SampleFormat::Pcm16)).unwrap();
        assert!((y16[0] - 1.0).abs() <= 1.0 / 32768.0);
        assert_eq!(y16[1], -1.0);
        assert_eq!(y16[2], 0.5);
        let y24 = decode_wav(&encode_wav(&x, SAMPLE_RATE, 1, SampleFormat::Pcm24)).unwrap();
        assert!((y24[0] - 1.0).abs() <= 1.0 / 8_388_608.0);
        assert_eq!(y24[1], -1.0);
        assert_eq!(&y24[2..], &[0.5, 0.0]);
    }

    #[test]
    fn rejects_stereo_and_other_rates() {
        let st = encode_wav(&[0.0; 8], SAMPLE_RATE, 2, SampleFormat::Pcm16);
        assert!(matches!(decode_wav(&st), Err(Error::Format(m)) if m.contains("channel")));
        let r = encode_wav(&[0.0; 8], 44_100, 1, SampleFormat::Pcm16);
        assert!(matches!(decode_wav(&r), Err(Error::Format(m)) if m.contains("44100")));
    }

    #[test]
    fn skips_unknown_chunks_and_handles_odd_padding() {
        let mut b = encode_wav(&[0.25, -0.25], SAMPLE_RATE, 1, SampleFormat::Pcm24);
        assert_eq!(b.len() % 2, 0);
        let data = b.split_off(36);
        b.extend_from_slice(b"LIST\x03\x00\x00\x00abc\x00");
        b.extend_from_slice(&data);
        assert_eq!(decode_wav(&b).unwrap(), vec![0.25, -0.25]);
    }

    #[test]
    fn malformed_inputs_are_format_errors() {
        let good = encode_wav(&[0.1, 0.2, 0.3], SAMPLE_RATE, 1, SampleFormat::Pcm16);
        for cut in 0..good.len() {
            assert!(
                matches!(decode_wav(&good[..cut]), Err(Error::Format(_))),
                "cut {cut}"
            );
        }
        assert!(decode_wav(b"RIFF\x00\x00\x00\x00WAVEdata\x00\x00\x00\x00").is_err());
    }
}
