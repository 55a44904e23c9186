//! Recurrent layers and the dense maps around them.
//!
//! Every cell exposes a checked single-step API (used by tests and by anyone
//! poking at a layer in isolation) plus unchecked sequence routines that the
//! model uses for inference and truncated backpropagation.

mod dense;
mod ed;
mod lru;
mod lstm;
mod s4d;
mod s6;

pub use dense::{project_input, Dense};
pub use ed::{ed_encode, ed_state_merge, EdCell, StridedConv};
pub use lru::{LruCell, LruInit, LruKernel};
pub use lstm::{LstmCell, LstmState};
pub use s4d::{diag_ssm_step, discretize_zoh, s4d_discretize, S4dCell, S4dKernel};
pub use s6::{S6Cell, S6StepMatrices};

pub(crate) use ed::EdTrace;
pub(crate) use lru::LruTrace;
pub(crate) use lstm::LstmTrace;
pub(crate) use s4d::S4dTrace;
pub(crate) use s6::S6Trace;

use crate::error::{Error, Result};
use crate::numerics::Complex64;

/// Input samples seen by the network for one output sample.
pub const WINDOW: usize = 64;
/// Half window used by the encoder-decoder split.
pub const ED_HALF: usize = WINDOW / 2;
pub const LSTM_UNITS: usize = 8;
pub const LSTM_INPUT: usize = 4;
pub const SSM_STATES: usize = 12;
/// Input projection width and output width of the linear-recurrence layers.
pub const SSM_WIDTH: usize = 6;
/// Width after the post-recurrent dense layer, shared by every variant.
pub const POST_WIDTH: usize = 4;

/// The 64 most recent input samples. Index 0 is the newest sample `x[n]`,
/// index 63 the oldest `x[n-63]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputWindow([f64; WINDOW]);

impl InputWindow {
    pub fn new(samples: &[f64]) -> Result<Self> {
        let arr: [f64; WINDOW] = samples.try_into().map_err(|_| {
            Error::Dimension(format!(
                "input window needs exactly {WINDOW} samples, got {}",
                samples.len()
            ))
        })?;
        Ok(Self(arr))
    }

    pub fn zeros() -> Self {
        Self([0.0; WINDOW])
    }

    /// Window ending at `signal[end]`, reading earlier samples backwards.
    /// Positions before the start of `signal` are zero.
    pub fn ending_at(signal: &[f64], end: usize) -> Self {
        let mut w = [0.0; WINDOW];
        for (j, slot) in w.iter_mut().enumerate() {
            if let Some(idx) = end.checked_sub(j) {
                *slot = signal[idx];
            }
        }
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Newest half `[x[n] .. x[n-31]]`.
    pub fn decoder_half(&self) -> &[f64] {
        &self.0[..ED_HALF]
    }

    /// Oldest half `[x[n-32] .. x[n-63]]`.
    pub fn encoder_half(&self) -> &[f64] {
        &self.0[ED_HALF..]
    }
}

/// Per-stream recurrent state. Belongs to exactly one stream.
#[derive(Clone, Debug, PartialEq)]
pub enum RecurrentState {
    Lstm(LstmState),
    Ed(LstmState),
    Lru([Complex64; SSM_STATES]),
    S4d([Complex64; SSM_STATES]),
    S6([f64; SSM_STATES]),
}

impl RecurrentState {
    pub fn is_finite(&self) -> bool {
        match self {
            RecurrentState::Lstm(s) | RecurrentState::Ed(s) => s.is_finite(),
            RecurrentState::Lru(h) | RecurrentState::S4d(h) => {
                h.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            }
            RecurrentState::S6(h) => h.iter().all(|x| x.is_finite()),
        }
    }
}

pub(crate) fn normal<R: rand::Rng>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}
