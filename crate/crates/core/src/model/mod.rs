//! Full networks: input projection, recurrent core, post layer,
//! FiLM/GLU conditioning and the one-unit output layer.

mod checkpoint;
mod flops;
mod schedule;
mod weights;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use flops::{
    count_flops, count_params, FlopsBreakdown, FLOPS_CONVENTION, REFERENCE_CONDITIONING_FLOPS,
    REFERENCE_FLOPS,
};
pub use schedule::{parse_schedule_csv, ParamSchedule};
pub use weights::{ConditioningBlock, CoreWeights, ModelWeights};

use crate::cells::{
    EdTrace, InputWindow, LruKernel, LruTrace, LstmState, LstmTrace, RecurrentState, S4dKernel,
    S4dTrace, S6Trace, ED_HALF, LSTM_INPUT, LSTM_UNITS, POST_WIDTH, SSM_STATES, SSM_WIDTH, WINDOW,
};
use crate::error::{Error, Result};
use crate::numerics::{softsign, Complex64};

/// Samples of past input held in a stream state (window minus the current sample).
pub const HISTORY: usize = WINDOW - 1;
pub(crate) const FILM_WIDTH: usize = 2 * POST_WIDTH;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Lstm,
    Ed,
    Lru,
    S4d,
    S6,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Lstm,
        Architecture::Ed,
        Architecture::Lru,
        Architecture::S4d,
        Architecture::S6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Lstm => "lstm",
            Architecture::Ed => "ed",
            Architecture::Lru => "lru",
            Architecture::S4d => "s4d",
            Architecture::S6 => "s6",
        }
    }

    /// Width of the input projection.
    pub fn proj_width(self) -> usize {
        if self.is_ssm() {
            SSM_WIDTH
        } else {
            LSTM_INPUT
        }
    }

    /// Number of window samples fed to the input projection.
    pub fn proj_inputs(self) -> usize {
        if self == Architecture::Ed {
            ED_HALF
        } else {
            WINDOW
        }
    }

    /// Width of the recurrent layer's output.
    pub fn core_width(self) -> usize {
        if self.is_ssm() {
            SSM_WIDTH
        } else {
            LSTM_UNITS
        }
    }

    /// Linear recurrences get a tanh after the post layer; LSTM variants do not.
    pub fn is_ssm(self) -> bool {
        matches!(
            self,
            Architecture::Lru | Architecture::S4d | Architecture::S6
        )
    }

    pub fn zero_state(self) -> RecurrentState {
        let z = Complex64::new(0.0, 0.0);
        match self {
            Architecture::Lstm => RecurrentState::Lstm(LstmState::default()),
            Architecture::Ed => RecurrentState::Ed(LstmState::default()),
            Architecture::Lru => RecurrentState::Lru([z; SSM_STATES]),
            Architecture::S4d => RecurrentState::S4d([z; SSM_STATES]),
            Architecture::S6 => RecurrentState::S6([0.0; SSM_STATES]),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lstm" => Ok(Architecture::Lstm),
            "ed" => Ok(Architecture::Ed),
            "lru" => Ok(Architecture::Lru),
            "s4d" => Ok(Architecture::S4d),
            "s6" => Ok(Architecture::S6),
            other => Err(Error::Input(format!(
                "unknown architecture '{other}' (expected lstm, ed, lru, s4d or s6)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Number of conditioning parameters `P`.
    pub cond_dim: usize,
    pub sample_rate: u32,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, cond_dim: usize) -> Self {
        Self {
            architecture,
            cond_dim,
            sample_rate: 48_000,
        }
    }
}

/// Per-stream state: recurrent state plus the last 63 input samples,
/// newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    history: [f64; HISTORY],
    recurrent: Option<RecurrentState>,
}

impl Default for ModelState {
    /// An uninitialized state; every forward call rejects it.
    fn default() -> Self {
        Self {
            history: [0.0; HISTORY],
            recurrent: None,
        }
    }
}

impl ModelState {
    pub fn recurrent(&self) -> Option<&RecurrentState> {
        self.recurrent.as_ref()
    }

    /// Past input samples, `history()[0]` being the most recent.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    #[inline]
    fn push(&mut self, x: f64) {
        self.history.copy_within(0..HISTORY - 1, 1);
        self.history[0] = x;
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Derived {
    None,
    Lru(LruKernel),
    S4d(S4dKernel),
    S6([f64; SSM_STATES]),
}

/// A network with validated weights and cached discretizations.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    weights: ModelWeights,
    pub(crate) derived: Derived,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SampleTrace {
    pub window: [f64; WINDOW],
    pub u: [f64; SSM_WIDTH],
    pub core_out: [f64; LSTM_UNITS],
    pub post: [f64; POST_WIDTH],
    pub q: [f64; POST_WIDTH],
    pub g: [f64; FILM_WIDTH],
    pub oc: [f64; POST_WIDTH],
}

impl Default for SampleTrace {
    fn default() -> Self {
        Self {
            window: [0.0; WINDOW],
            u: [0.0; SSM_WIDTH],
            core_out: [0.0; LSTM_UNITS],
            post: [0.0; POST_WIDTH],
            q: [0.0; POST_WIDTH],
            g: [0.0; FILM_WIDTH],
            oc: [0.0; POST_WIDTH],
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CoreTrace {
    Lstm(Vec<LstmTrace>),
    Ed(Vec<EdTrace>),
    Lru(Vec<LruTrace>),
    S4d(Vec<S4dTrace>),
    S6(Vec<S6Trace>),
}

#[derive(Clone, Debug)]
pub(crate) struct SegmentTrace {
    pub samples: Vec<SampleTrace>,
    pub core: CoreTrace,
    pub film: Option<[f64; FILM_WIDTH]>,
    pub outputs: Vec<f64>,
}

impl Model {
    pub fn new(config: ModelConfig, weights: ModelWeights) -> Result<Self> {
        weights.check_config(&config)?;
        let mut m = Self {
            config,
            weights,
            derived: Derived::None,
        };
        m.refresh()?;
        Ok(m)
    }

    /// Fresh randomly initialized model.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = ModelWeights::init(&config, &mut rng);
        Self::new(config, w)
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let w = ModelWeights::zeros(&config);
        Self::new(config, w)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn into_weights(self) -> ModelWeights {
        self.weights
    }

    /// Replaces all weights; rejects shape mismatches and unstable recurrences.
    pub fn set_weights(&mut self, weights: ModelWeights) -> Result<()> {
        weights.check_config(&self.config)?;
        let old = std::mem::replace(&mut self.weights, weights);
        if let Err(e) = self.refresh() {
            self.weights = old;
            self.refresh()?;
            return Err(e);
        }
        Ok(())
    }

    pub(crate) fn weights_mut(&mut self) -> &mut ModelWeights {
        &mut self.weights
    }

    /// Recomputes cached kernels and re-checks finiteness and stability.
    pub fn refresh(&mut self) -> Result<()> {
        if let Some((name, _)) = self
            .weights
            .tensors()
            .into_iter()
            .find(|(_, m)| !m.all_finite())
        {
            return Err(Error::Numeric(format!(
                "weight array '{name}' has non-finite entries"
            )));
        }
        self.derived = match &self.weights.core {
            CoreWeights::Lstm(_) | CoreWeights::Ed(_) => Derived::None,
            CoreWeights::Lru(c) => Derived::Lru(c.kernel()?),
            CoreWeights::S4d(c) => Derived::S4d(c.kernel()?),
            CoreWeights::S6(c) => Derived::S6(c.poles()),
        };
        Ok(())
    }

    pub fn count_params(&self) -> usize {
        count_params(self)
    }

    pub fn count_flops(&self) -> FlopsBreakdown {
        count_flops(self)
    }

    pub fn initial_state(&self) -> ModelState {
        ModelState {
            history: [0.0; HISTORY],
            recurrent: Some(self.config.architecture.zero_state()),
        }
    }

    /// FiLM coefficients `[theta, eta]` for conditioning vector `p`, or
    /// `None` when the model has no conditioning inputs.
    pub fn film_coefficients(&self, p: &[f64]) -> Result<Option<[f64; FILM_WIDTH]>> {
        check_params(self.config.cond_dim, p)?;
        Ok(self.weights.cond.film.as_ref().map(|film| {
            let mut f = [0.0; FILM_WIDTH];
            film.forward_into(p, &mut f);
            f
        }))
    }

    fn check_state<'a>(
        &self,
        rec: &'a mut Option<RecurrentState>,
    ) -> Result<&'a mut RecurrentState> {
        let arch = self.config.architecture;
        let rec = rec
            .as_mut()
            .ok_or_else(|| Error::State("stream state was never initialized".into()))?;
        let ok = matches!(
            (arch, &*rec),
            (Architecture::Lstm, RecurrentState::Lstm(_))
                | (Architecture::Ed, RecurrentState::Ed(_))
                | (Architecture::Lru, RecurrentState::Lru(_))
                | (Architecture::S4d, RecurrentState::S4d(_))
                | (Architecture::S6, RecurrentState::S6(_))
        );
        if !ok {
            return Err(Error::State(format!(
                "state does not belong to a {arch} model"
            )));
        }
        Ok(rec)
    }

    /// Output for one full input window. The window's older samples replace
    /// the stream history.
    pub fn forward_sample(
        &self,
        state: &mut ModelState,
        window: &InputWindow,
        p: &[f64],
    ) -> Result<f64> {
        let film = self.film_coefficients(p)?;
        let rec = self.check_state(&mut state.recurrent)?;
        let mut win = [0.0; WINDOW];
        win.copy_from_slice(window.as_slice());
        let y = self.step(rec, &win, film.as_ref(), None);
        state.history.copy_from_slice(&win[..HISTORY]);
        finite_output(y, state)
    }

    /// Consumes one new input sample.
    pub fn process_sample(&self, state: &mut ModelState, x: f64, p: &[f64]) -> Result<f64> {
        let film = self.film_coefficients(p)?;
        let rec = self.check_state(&mut state.recurrent)?;
        let win = window_from(x, &state.history);
        let y = self.step(rec, &win, film.as_ref(), None);
        state.push(x);
        finite_output(y, state)
    }

    /// Processes a contiguous block of new samples; equivalent to repeated
    /// [`Model::process_sample`].
    pub fn forward_segment(
        &self,
        state: &mut ModelState,
        input: &[f64],
        p: &[f64],
    ) -> Result<Vec<f64>> {
        let film = self.film_coefficients(p)?;
        let rec = self.check_state(&mut state.recurrent)?;
        let mut out = Vec::with_capacity(input.len());
        let mut history = state.history;
        for &x in input {
            let win = window_from(x, &history);
            out.push(self.step(rec, &win, film.as_ref(), None));
            history.copy_within(0..HISTORY - 1, 1);
            history[0] = x;
        }
        state.history = history;
        if out.iter().any(|y| !y.is_finite()) || !rec.is_finite() {
            return Err(Error::Numeric(
                "non-finite output or state in segment".into(),
            ));
        }
        Ok(out)
    }

    /// Forward pass over a segment recording everything the backward pass needs.
    pub(crate) fn forward_traced(
        &self,
        state: &mut ModelState,
        input: &[f64],
        p: &[f64],
    ) -> Result<SegmentTrace> {
        let film = self.film_coefficients(p)?;
        let rec = self.check_state(&mut state.recurrent)?;
        let n = input.len();
        let mut trace = SegmentTrace {
            samples: Vec::with_capacity(n),
            core: match self.config.architecture {
                Architecture::Lstm => CoreTrace::Lstm(Vec::with_capacity(n)),
                Architecture::Ed => CoreTrace::Ed(Vec::with_capacity(n)),
                Architecture::Lru => CoreTrace::Lru(Vec::with_capacity(n)),
                Architecture::S4d => CoreTrace::S4d(Vec::with_capacity(n)),
                Architecture::S6 => CoreTrace::S6(Vec::with_capacity(n)),
            },
            film,
            outputs: Vec::with_capacity(n),
        };
        let mut history = state.history;
        for &x in input {
            let win = window_from(x, &history);
            let mut st = SampleTrace::default();
            let y = self.step(rec, &win, film.as_ref(), Some((&mut st, &mut trace.core)));
            trace.samples.push(st);
            trace.outputs.push(y);
            history.copy_within(0..HISTORY - 1, 1);
            history[0] = x;
        }
        state.history = history;
        if trace.outputs.iter().any(|y| !y.is_finite()) || !rec.is_finite() {
            return Err(Error::Numeric(
                "non-finite output or state in segment".into(),
            ));
        }
        Ok(trace)
    }

    #[inline]
    fn step(
        &self,
        rec: &mut RecurrentState,
        win: &[f64; WINDOW],
        film: Option<&[f64; FILM_WIDTH]>,
        trace: Option<(&mut SampleTrace, &mut CoreTrace)>,
    ) -> f64 {
        let arch = self.config.architecture;
        let w = &self.weights;
        let ud = arch.proj_width();
        let cd = arch.core_width();
        let mut u = [0.0; SSM_WIDTH];
        w.proj
            .forward_into(&win[..arch.proj_inputs()], &mut u[..ud]);
        let mut o = [0.0; LSTM_UNITS];
        let want = trace.is_some();
        let (st, ct) = match trace {
            Some((s, c)) => (Some(s), Some(c)),
            None => (None, None),
        };
        match (&w.core, rec, &self.derived) {
            (CoreWeights::Lstm(c), RecurrentState::Lstm(s), _) => {
                let mut t = LstmTrace::default();
                c.step_traced(s, &u[..ud], want.then_some(&mut t));
                o = s.h;
                if let Some(CoreTrace::Lstm(v)) = ct {
                    v.push(t);
                }
            }
            (CoreWeights::Ed(c), RecurrentState::Ed(s), _) => {
                let mut t = EdTrace::default();
                c.step_traced(s, &u[..ud], &win[ED_HALF..], want.then_some(&mut t));
                o = s.h;
                if let Some(CoreTrace::Ed(v)) = ct {
                    v.push(t);
                }
            }
            (CoreWeights::Lru(c), RecurrentState::Lru(h), Derived::Lru(k)) => {
                let mut t = LruTrace::default();
                let mut out = [0.0; SSM_WIDTH];
                c.step_traced(k, h, &u[..ud], &mut out, want.then_some(&mut t));
                o[..cd].copy_from_slice(&out);
                if let Some(CoreTrace::Lru(v)) = ct {
                    v.push(t);
                }
            }
            (CoreWeights::S4d(c), RecurrentState::S4d(h), Derived::S4d(k)) => {
                let mut t = S4dTrace::default();
                let mut out = [0.0; SSM_WIDTH];
                c.step_traced(k, h, &u[..ud], &mut out, want.then_some(&mut t));
                o[..cd].copy_from_slice(&out);
                if let Some(CoreTrace::S4d(v)) = ct {
                    v.push(t);
                }
            }
            (CoreWeights::S6(c), RecurrentState::S6(h), Derived::S6(a)) => {
                let mut t = S6Trace::default();
                let mut out = [0.0; SSM_WIDTH];
                c.step_traced(a, h, &u[..ud], &mut out, want.then_some(&mut t));
                o[..cd].copy_from_slice(&out);
                if let Some(CoreTrace::S6(v)) = ct {
                    v.push(t);
                }
            }
            _ => unreachable!("state and weights validated against the same architecture"),
        }
        let mut post = [0.0; POST_WIDTH];
        w.post.forward_into(&o[..cd], &mut post);
        if arch.is_ssm() {
            for v in &mut post {
                *v = v.tanh();
            }
        }
        let mut q = post;
        if let Some(f) = film {
            for k in 0..POST_WIDTH {
                q[k] = f[k] * post[k] + f[POST_WIDTH + k];
            }
        }
        let mut g = [0.0; FILM_WIDTH];
        w.cond.glu.forward_into(&q, &mut g);
        let mut oc = [0.0; POST_WIDTH];
        for k in 0..POST_WIDTH {
            oc[k] = g[k] * softsign(g[POST_WIDTH + k]);
        }
        let mut y = [0.0];
        w.out.forward_into(&oc, &mut y);
        if let Some(s) = st {
            s.window = *win;
            s.u = u;
            s.core_out = o;
            s.post = post;
            s.q = q;
            s.g = g;
            s.oc = oc;
        }
        y[0]
    }
}

/// FiLM followed by the softsign-gated linear unit:
/// `q = theta * o + eta`, `[q1, q2] = G q + b`, result `q1 * softsign(q2)`.
/// Without a FiLM map `q = o`.
pub fn conditioning_apply(cb: &ConditioningBlock, o: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    crate::cells::check_len("conditioning input", o.len(), POST_WIDTH)?;
    let cond_dim = cb.film.as_ref().map_or(0, |f| f.inputs());
    check_params(cond_dim, p)?;
    let mut q = [0.0; POST_WIDTH];
    q.copy_from_slice(o);
    if let Some(film) = &cb.film {
        let f = film.forward(p)?;
        for k in 0..POST_WIDTH {
            q[k] = f[k] * o[k] + f[POST_WIDTH + k];
        }
    }
    let g = cb.glu.forward(&q)?;
    Ok((0..POST_WIDTH)
        .map(|k| g[k] * softsign(g[POST_WIDTH + k]))
        .collect())
}

fn check_params(cond_dim: usize, p: &[f64]) -> Result<()> {
    if p.len() != cond_dim {
        return Err(Error::Dimension(format!(
            "conditioning vector has {} entries, model expects {cond_dim}",
            p.len()
        )));
    }
    if let Some((i, v)) = p
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::Input(format!(
            "conditioning parameter {i} = {v} is outside [0, 1]"
        )));
    }
    Ok(())
}

#[inline]
fn window_from(x: f64, history: &[f64; HISTORY]) -> [f64; WINDOW] {
    let mut win = [0.0; WINDOW];
    win[0] = x;
    win[1..].copy_from_slice(history);
    win
}

fn finite_output(y: f64, state: &ModelState) -> Result<f64> {
    let ok = y.is_finite() && state.recurrent.as_ref().is_some_and(|r| r.is_finite());
    if ok {
        Ok(y)
    } else {
        Err(Error::Numeric("non-finite output or state".into()))
    }
}

#[cfg(test)]
mod tests;
