use super::{check_params, Model};
use crate::error::{Error, Result};

/// Piecewise-constant conditioning over time.
///
/// Each point holds from its sample index until the next point. Samples
/// before the first point use the first point's values.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSchedule {
    points: Vec<(usize, Vec<f64>)>,
}

impl ParamSchedule {
    pub fn constant(p: Vec<f64>) -> Result<Self> {
        check_params(p.len(), &p)?;
        Ok(Self {
            points: vec![(0, p)],
        })
    }

    pub fn new(points: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        let Some(width) = points.first().map(|(_, p)| p.len()) else {
            return Err(Error::Input("schedule has no points".into()));
        };
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Input(format!(
                    "schedule indices must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for (_, p) in &points {
            check_params(width, p)?;
        }
        Ok(Self { points })
    }

    pub fn cond_dim(&self) -> usize {
        self.points[0].1.len()
    }

    pub fn points(&self) -> &[(usize, Vec<f64>)] {
        &self.points
    }

    pub fn at(&self, n: usize) -> &[f64] {
        let i = self.points.partition_point(|(s, _)| *s <= n);
        &self.points[i.saturating_sub(1)].1
    }
}

/// Parses `sample_index,p1,...,pP` rows after a header line. `#` lines and
/// blank lines are skipped. Any problem is a format error.
pub fn parse_schedule_csv(text: &str) -> Result<ParamSchedule> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = rows
        .next()
        .ok_or_else(|| Error::Format("empty schedule".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"sample_index") {
        return Err(Error::Format(
            "schedule header must start with 'sample_index'".into(),
        ));
    }
    let width = cols.len() - 1;
    let mut points = Vec::new();
    for (line, row) in rows {
        let f: Vec<&str> = row.split(',').map(str::trim).collect();
        if f.len() != width + 1 {
            return Err(Error::Format(format!(
                "line {line}: expected {} fields, got {}",
                width + 1,
                f.len()
            )));
        }
        let idx = f[0]
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("line {line}: bad sample index '{}'", f[0])))?;
        let vals = f[1..]
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {line}: bad value '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        points.push((idx, vals));
    }
    ParamSchedule::new(points).map_err(|e| match e {
        Error::Format(m) => Error::Format(m),
        other => Error::Format(other.to_string()),
    })
}

impl Model {
    /// Streams `input` sample by sample from a fresh state, taking the
    /// conditioning for each sample from `schedule`.
    pub fn render(&self, input: &[f64], schedule: &ParamSchedule) -> Result<Vec<f64>> {
        if schedule.cond_dim() != self.config().cond_dim {
            return Err(Error::Compatibility(format!(
                "schedule has {} parameters, model expects {}",
                schedule.cond_dim(),
                self.config().cond_dim
            )));
        }
        let mut state = self.initial_state();
        input
            .iter()
            .enumerate()
            .map(|(n, &x)| self.process_sample(&mut state, x, schedule.at(n)))
            .collect()
    }
}
