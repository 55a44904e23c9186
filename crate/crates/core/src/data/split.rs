use std::ops::Range;

use super::dataset::Recording;
use super::wav::SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::training::Stream;

pub const MAX_COMPOSITIONS: usize = 5;
/// Each recording is cut into this many nominal spans.
pub const SPAN_COUNT: usize = 10;
pub const SNAP_RADIUS_S: f64 = 0.5;
pub const SNAP_WINDOW: usize = 1024;
/// A point is quiet when its local RMS is below this fraction of the recording RMS.
pub const SNAP_RMS_RATIO: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingSplit {
    /// Contiguous training runs, in time order.
    pub train: Vec<Range<usize>>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitComposition {
    /// 1-based.
    pub index: usize,
    pub recordings: Vec<RecordingSplit>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitStreams {
    pub train: Vec<Stream>,
    pub validation: Vec<Stream>,
    pub test: Vec<Stream>,
}

/// Tenths held out as (validation, test) by composition `c` (0-based).
pub fn held_out_spans(c: usize) -> (usize, usize) {
    ((2 * c) % SPAN_COUNT, (2 * c + 1) % SPAN_COUNT)
}

/// Moves each nominal cut to the nearest quiet sample within the snap radius.
/// Returns the snapped cuts and how many fell back to the nominal point.
pub fn snap_points(signal: &[f64], nominal: &[usize], sample_rate: u32) -> (Vec<usize>, usize) {
    snap_within(
        signal,
        nominal,
        (SNAP_RADIUS_S * f64::from(sample_rate)) as usize,
    )
}

fn snap_within(signal: &[f64], nominal: &[usize], radius: usize) -> (Vec<usize>, usize) {
    let n = signal.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in signal {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let total_rms = (prefix[n] / n.max(1) as f64).sqrt();
    let half = SNAP_WINDOW / 2;
    let quiet = |p: usize| -> bool {
        if p < half || p + half > n {
            return false;
        }
        let e = prefix[p + half] - prefix[p - half];
        (e / SNAP_WINDOW as f64).sqrt() < SNAP_RMS_RATIO * total_rms
    };
    let mut fallbacks = 0;
    let snapped = nominal
        .iter()
        .map(|&p| {
            let found = (0..=radius).find_map(|d| {
                [p.checked_sub(d), p.checked_add(d)]
                    .into_iter()
                    .flatten()
                    .find(|&q| quiet(q))
            });
            found.unwrap_or_else(|| {
                fallbacks += 1;
                p
            })
        })
        .collect();
    (snapped, fallbacks)
}

fn cuts_for(rec: &Recording) -> Vec<usize> {
    let n = rec.input.len();
    let nominal: Vec<usize> = (1..SPAN_COUNT).map(|k| k * n / SPAN_COUNT).collect();
    // below half a span, so neighbouring cuts can never cross
    let radius = ((SNAP_RADIUS_S * f64::from(SAMPLE_RATE)) as usize)
        .min((n / SPAN_COUNT).saturating_sub(1) / 2);
    let (cuts, fallbacks) = snap_within(&rec.input, &nominal, radius);
    if fallbacks > 0 {
        log::warn!(
            "{fallbacks} split point(s) found no quiet sample nearby; using nominal positions"
        );
    }
    let mut all = vec![0];
    all.extend(cuts);
    all.push(n);
    all
}

/// Builds `n` compositions. In composition `c` (0-based) each recording gives
/// span `2c` to validation, span `2c + 1` to test and the other eight tenths to
/// training, so validation and test never share audio and the five test sets
/// together cover every span once.
pub fn make_split_compositions(
    recordings: &[Recording],
    n: usize,
) -> Result<Vec<SplitComposition>> {
    if n == 0 || n > MAX_COMPOSITIONS {
        return Err(Error::Input(format!(
            "composition count {n} outside 1..={MAX_COMPOSITIONS}"
        )));
    }
    if recordings.is_empty() {
        return Err(Error::Input("no recordings to split".into()));
    }
    let min_len = SPAN_COUNT * SNAP_WINDOW;
    if let Some(r) = recordings.iter().find(|r| r.input.len() < min_len) {
        return Err(Error::Input(format!(
            "recording of {} samples is too short to split (need {min_len})",
            r.input.len()
        )));
    }
    let cuts: Vec<Vec<usize>> = recordings.iter().map(cuts_for).collect();
    Ok((0..n)
        .map(|c| {
            let (v, t) = held_out_spans(c);
            let recordings = cuts
                .iter()
                .map(|b| {
                    let span = |k: usize| b[k]..b[k + 1];
                    let mut train: Vec<Range<usize>> = Vec::new();
                    for k in (0..SPAN_COUNT).filter(|&k| k != v && k != t) {
                        match train.last_mut() {
                            Some(last) if last.end == b[k] => last.end = b[k + 1],
                            _ => train.push(span(k)),
                        }
                    }
                    RecordingSplit {
                        train,
                        validation: span(v),
                        test: span(t),
                    }
                })
                .collect();
            SplitComposition {
                index: c + 1,
                recordings,
            }
        })
        .collect())
}

impl SplitComposition {
    /// Cuts recordings into per-split streams with constant conditioning.
    pub fn streams(&self, recordings: &[Recording]) -> Result<SplitStreams> {
        if recordings.len() != self.recordings.len() {
            return Err(Error::Dimension(format!(
                "composition covers {} recordings, got {}",
                self.recordings.len(),
                recordings.len()
            )));
        }
        let mut out = SplitStreams::default();
        for (i, (rec, sp)) in recordings.iter().zip(&self.recordings).enumerate() {
            let cut = |r: &Range<usize>, label: String| {
                Stream::new(
                    rec.input[r.clone()].to_vec(),
                    rec.output[r.clone()].to_vec(),
                    rec.params.clone(),
                    label,
                )
            };
            for (j, r) in sp.train.iter().enumerate() {
                out.train.push(cut(r, format!("comb_{i:03}/train{j}"))?);
            }
            out.validation
                .push(cut(&sp.validation, format!("comb_{i:03}/validation"))?);
            out.test.push(cut(&sp.test, format!("comb_{i:03}/test"))?);
        }
        Ok(out)
    }
}
