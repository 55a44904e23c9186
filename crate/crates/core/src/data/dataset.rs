use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::{apply_oracle, OracleKind};
use super::signal::generate_input_signal;
use super::wav::{load_wav, save_wav, SAMPLE_RATE};
use crate::error::{Error, Result};

pub const RECORDING_SECONDS: f64 = 45.0;
pub const DATASET_FILE: &str = "dataset.json";
const DATASET_FORMAT: &str = "vastate-dataset";

#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// Conditioning values in [0, 1].
    pub params: Vec<f64>,
    pub physical: Vec<f64>,
    pub param_labels: Vec<String>,
}

/// Physical values to sweep, one list per effect parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid(pub Vec<Vec<f64>>);

impl ParamGrid {
    /// `n` values per parameter, evenly spaced on the normalized axis.
    pub fn uniform(kind: OracleKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input(
                "grid needs at least one value per parameter".into(),
            ));
        }
        let specs = kind.param_specs();
        specs
            .iter()
            .map(|s| {
                (0..n)
                    .map(|i| {
                        s.denormalize(if n == 1 {
                            0.5
                        } else {
                            i as f64 / (n - 1) as f64
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()
            .map(ParamGrid)
    }

    /// Parses `name=v1,v2;name=v3`. Parameters left out are held at their
    /// mid-range value.
    pub fn parse(kind: OracleKind, text: &str) -> Result<Self> {
        let specs = kind.param_specs();
        let mut values: Vec<Option<Vec<f64>>> = vec![None; specs.len()];
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, list) = part
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("grid entry '{part}' lacks '='")))?;
            let idx = specs
                .iter()
                .position(|s| s.name == name.trim())
                .ok_or_else(|| {
                    Error::Input(format!("{kind} has no parameter '{}'", name.trim()))
                })?;
            let vals = list
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Input(format!("bad value '{v}' for {}", specs[idx].name))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            values[idx] = Some(vals);
        }
        let grid = values
            .into_iter()
            .zip(specs)
            .map(|(v, s)| v.map_or_else(|| s.denormalize(0.5).map(|m| vec![m]), Ok))
            .collect::<Result<Vec<_>>>()?;
        let g = ParamGrid(grid);
        g.check(kind)?;
        Ok(g)
    }

    fn check(&self, kind: OracleKind) -> Result<()> {
        let specs = kind.param_specs();
        if self.0.len() != specs.len() {
            return Err(Error::Dimension(format!(
                "{kind} takes {} parameters, grid has {}",
                specs.len(),
                self.0.len()
            )));
        }
        for (s, vals) in specs.iter().zip(&self.0) {
            if vals.is_empty() {
                return Err(Error::Input(format!("no values for {}", s.name)));
            }
            for &v in vals {
                s.normalize(v)?;
            }
        }
        Ok(())
    }

    /// Every combination, the last parameter varying fastest.
    pub fn combinations(&self) -> Vec<Vec<f64>> {
        self.0.iter().fold(vec![vec![]], |acc, vals| {
            acc.iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect()
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub effect: OracleKind,
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub grid: ParamGrid,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn cond_dim(&self) -> usize {
        self.effect.param_specs().len()
    }
}

/// One 45 s recording per grid combination.
pub fn build_dataset(effect: OracleKind, grid: &ParamGrid, seed: u64) -> Result<Dataset> {
    build_dataset_with(effect, grid, seed, RECORDING_SECONDS, None)
}

/// As [`build_dataset`] with a custom duration and optional instrument material.
pub fn build_dataset_with(
    effect: OracleKind,
    grid: &ParamGrid,
    seed: u64,
    duration_s: f64,
    material: Option<&[f64]>,
) -> Result<Dataset> {
    grid.check(effect)?;
    let input = generate_input_signal(duration_s, SAMPLE_RATE, seed, material)?;
    let labels: Vec<String> = effect
        .param_specs()
        .iter()
        .map(|s| s.name.to_string())
        .collect();
    let recordings = grid
        .combinations()
        .into_par_iter()
        .map(|phys| {
            Ok(Recording {
                output: apply_oracle(effect, &phys, &input, SAMPLE_RATE)?,
                input: input.clone(),
                params: effect.normalize(&phys)?,
                physical: phys,
                param_labels: labels.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        effect,
        seed,
        sample_rate: SAMPLE_RATE,
        duration_s,
        grid: grid.clone(),
        recordings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub effect: OracleKind,
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub param_labels: Vec<String>,
    pub grid: ParamGrid,
    pub combinations: usize,
}

/// Per-combination metadata stored next to its WAV pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub effect: OracleKind,
    pub combination: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub samples: usize,
    pub param_labels: Vec<String>,
    pub physical: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Parses and validates a sidecar.
pub fn parse_sidecar(text: &str) -> Result<Sidecar> {
    let s: Sidecar =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("sidecar: {e}")))?;
    let n = s.effect.param_specs().len();
    if s.param_labels.len() != n || s.physical.len() != n || s.normalized.len() != n {
        return Err(Error::Format(format!(
            "sidecar for {} must list {n} parameters",
            s.effect
        )));
    }
    if s.normalized.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Format(
            "sidecar normalized parameters outside [0, 1]".into(),
        ));
    }
    if s.sample_rate != SAMPLE_RATE {
        return Err(Error::Format(format!(
            "sidecar sample rate {} unsupported",
            s.sample_rate
        )));
    }
    Ok(s)
}

pub fn parse_dataset_manifest(text: &str) -> Result<DatasetManifest> {
    let m: DatasetManifest =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("{DATASET_FILE}: {e}")))?;
    if m.format != DATASET_FORMAT || m.version != 1 {
        return Err(Error::Format(format!(
            "unsupported dataset format {} v{}",
            m.format, m.version
        )));
    }
    Ok(m)
}

pub fn combination_stem(i: usize) -> String {
    format!("comb_{i:03}")
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes `dataset.json` and, per combination, `comb_NNN.input.wav`,
/// `comb_NNN.output.wav` and `comb_NNN.json`. Returns the paths written.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: 1,
        effect: ds.effect,
        seed: ds.seed,
        sample_rate: ds.sample_rate,
        duration_s: ds.duration_s,
        param_labels: ds
            .effect
            .param_specs()
            .iter()
            .map(|s| s.name.to_string())
            .collect(),
        grid: ds.grid.clone(),
        combinations: ds.recordings.len(),
    };
    let path = dir.join(DATASET_FILE);
    fs::write(&path, to_json(&manifest)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    for (i, r) in ds.recordings.iter().enumerate() {
        let stem = combination_stem(i);
        let inp = dir.join(format!("{stem}.input.wav"));
        let out = dir.join(format!("{stem}.output.wav"));
        save_wav(&inp, &r.input)?;
        save_wav(&out, &r.output)?;
        let side = Sidecar {
            effect: ds.effect,
            combination: i,
            seed: ds.seed,
            sample_rate: ds.sample_rate,
            samples: r.input.len(),
            param_labels: r.param_labels.clone(),
            physical: r.physical.clone(),
            normalized: r.params.clone(),
        };
        let sp = dir.join(format!("{stem}.json"));
        fs::write(&sp, to_json(&side)).map_err(|e| Error::io(&sp, e))?;
        written.extend([inp, out, sp]);
    }
    Ok(written)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(DATASET_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m = parse_dataset_manifest(&text)?;
    let recordings = (0..m.combinations)
        .map(|i| {
            let stem = combination_stem(i);
            let sp = dir.join(format!("{stem}.json"));
            let side = parse_sidecar(&fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?)?;
            if side.effect != m.effect || side.combination != i {
                return Err(Error::Format(format!(
                    "{} does not match {DATASET_FILE}",
                    sp.display()
                )));
            }
            let input = load_wav(&dir.join(format!("{stem}.input.wav")))?;
            let output = load_wav(&dir.join(format!("{stem}.output.wav")))?;
            if input.len() != output.len() || input.len() != side.samples {
                return Err(Error::Format(format!(
                    "{stem}: input {} samples, output {}, sidecar {}",
                    input.len(),
                    output.len(),
                    side.samples
                )));
            }
            Ok(Recording {
                input,
                output,
                params: side.normalized,
                physical: side.physical,
                param_labels: side.param_labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        effect: m.effect,
        seed: m.seed,
        sample_rate: m.sample_rate,
        duration_s: m.duration_s,
        grid: m.grid,
        recordings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_combinations() {
        let g = ParamGrid::uniform(OracleKind::WaveshaperOverdrive, 5).unwrap();
        let c = g.combinations();
        assert_eq!(c.len(), 25);
        assert_eq!(c[0], vec![1.0, 1_500.0]);
        assert!((c[24][0] - 50.0).abs() < 1e-9);
        assert_eq!(ParamGrid(vec![]).combinations(), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn grid_parsing() {
        let g = ParamGrid::parse(OracleKind::WaveshaperOverdrive, "drive=1,2,4").unwrap();
        assert_eq!(g.0[0], vec![1.0, 2.0, 4.0]);
        assert_eq!(g.0[1].len(), 1);
        assert!(ParamGrid::parse(OracleKind::WaveshaperOverdrive, "gain=1").is_err());
        assert!(ParamGrid::parse(OracleKind::WaveshaperOverdrive, "drive=0.1").is_err());
        assert!(ParamGrid::parse(OracleKind::WaveshaperOverdrive, "drive").is_err());
    }

    #[test]
    fn dataset_roundtrip_on_disk() {
        let g = ParamGrid::parse(OracleKind::WaveshaperOverdrive, "drive=1,10").unwrap();
        let ds = build_dataset_with(OracleKind::WaveshaperOverdrive, &g, 3, 1.0, None).unwrap();
        assert_eq!(ds.recordings.len(), 2);
        let r = &ds.recordings[1];
        assert_eq!(r.params.len(), 2);
        assert!(r.params.iter().all(|p| (0.0..=1.0).contains(p)));
        let dir = tempfile::tempdir().unwrap();
        let files = write_dataset(dir.path(), &ds).unwrap();
        assert_eq!(files.len(), 7);
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.recordings.len(), 2);
        assert_eq!(back.grid, ds.grid);
        for (a, b) in back.recordings.iter().zip(&ds.recordings) {
            assert_eq!(a.params, b.params);
            assert!(a
                .output
                .iter()
                .zip(&b.output)
                .all(|(x, y)| (x - y).abs() < 1e-7));
        }
        let again = tempfile::tempdir().unwrap();
        write_dataset(
            again.path(),
            &build_dataset_with(OracleKind::WaveshaperOverdrive, &g, 3, 1.0, None).unwrap(),
        )
        .unwrap();
        for f in &files {
            let name = f.file_name().unwrap();
            assert_eq!(
                fs::read(f).unwrap(),
                fs::read(again.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn sidecar_validation() {
        let ok = r#"{"effect":"identity","combination":0,"seed":1,"sample_rate":48000,"samples":10,
            "param_labels":[],"physical":[],"normalized":[]}"#;
        assert!(parse_sidecar(ok).is_ok());
        let bad = ok.replace("\"identity\"", "\"peaking_eq\"");
        assert!(matches!(parse_sidecar(&bad), Err(Error::Format(_))));
        assert!(parse_sidecar("{").is_err());
    }
}
