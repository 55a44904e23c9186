use serde::Serialize;

use super::{Architecture, Model, FILM_WIDTH};
use crate::cells::{ED_HALF, LSTM_INPUT, LSTM_UNITS, POST_WIDTH, SSM_STATES, SSM_WIDTH};

/// Tag carried by every breakdown so numbers are never compared across conventions.
pub const FLOPS_CONVENTION: &str =
    "mac=1 bias=1 elementwise=1 transcendental=4 softsign=3 complex_mul=6 complex_add=2 complex_real_mul=2";

/// Published per-sample totals, kept for comparison only.
pub const REFERENCE_FLOPS: [(Architecture, u64); 5] = [
    (Architecture::Lstm, 1160),
    (Architecture::Ed, 1048),
    (Architecture::Lru, 812),
    (Architecture::S4d, 912),
    (Architecture::S6, 984),
];

/// Published per-sample cost of the conditioning block.
pub const REFERENCE_CONDITIONING_FLOPS: u64 = 120;

const MAC: u64 = 1;
const ELEM: u64 = 1;
const TRANSCENDENTAL: u64 = 4;
const SOFTSIGN: u64 = 3;
const COMPLEX_MUL: u64 = 6;
const COMPLEX_ADD: u64 = 2;
const COMPLEX_REAL_MUL: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlopsBreakdown {
    pub architecture: Architecture,
    pub projection: u64,
    pub recurrent_layer: u64,
    pub post_layer: u64,
    pub conditioning_block: u64,
    pub output_layer: u64,
    pub total: u64,
    pub convention: &'static str,
    pub reference_total: u64,
    pub reference_conditioning: u64,
}

impl FlopsBreakdown {
    /// Signed relative deviation of `total` from the published value.
    pub fn deviation(&self) -> f64 {
        (self.total as f64 - self.reference_total as f64) / self.reference_total as f64
    }
}

fn dense(out: usize, inp: usize) -> u64 {
    (out * inp) as u64 * MAC + out as u64
}

fn recurrent(arch: Architecture) -> u64 {
    let n = SSM_STATES as u64;
    let w = SSM_WIDTH as u64;
    let h = LSTM_UNITS as u64;
    let lstm = dense(4 * LSTM_UNITS, LSTM_UNITS + LSTM_INPUT) // stacked gate pre-activations
        + 5 * h * TRANSCENDENTAL // three sigmoids, two tanh
        + 3 * h * ELEM // c = f*c + i*g
        + h * ELEM; // h = o*tanh(c)
    match arch {
        Architecture::Lstm => lstm,
        Architecture::Ed => {
            let enc = 2 * dense(LSTM_UNITS, ED_HALF / LSTM_UNITS);
            let merge = 2 * h * (TRANSCENDENTAL + ELEM);
            enc + merge + lstm
        }
        Architecture::Lru => {
            n * w * COMPLEX_REAL_MUL // B u
                + n * COMPLEX_REAL_MUL // gamma scaling
                + n * COMPLEX_MUL // lambda * h
                + 2 * n * COMPLEX_ADD // + B u, + b_h
                + w * n * 2 * MAC // Re(C h)
                + w // output bias
        }
        Architecture::S4d => {
            n * w * COMPLEX_REAL_MUL // B_bar u
                + n * COMPLEX_MUL // A_bar * h
                + n * COMPLEX_ADD
                + w * n * 2 * MAC // Re(C h)
                + 2 * w * ELEM // D u
        }
        Architecture::S6 => {
            let step = dense(1, SSM_WIDTH) + TRANSCENDENTAL; // softplus(w . u + b)
            let gains = 2 * dense(SSM_STATES, SSM_WIDTH) + n * w * MAC; // beta, kappa, E u
            let disc = n * (ELEM + TRANSCENDENTAL) + 2 * n * ELEM; // exp(delta A), (A_bar - 1)/A
            let update = 2 * n * ELEM + 2 * n * ELEM; // coef*beta*v, A_bar*h + .
            let read = n * ELEM + w * n * MAC + 2 * w * ELEM; // kappa*h, F s, D u
            step + gains + disc + update + read
        }
    }
}

fn conditioning(cond_dim: usize) -> u64 {
    let film = if cond_dim > 0 {
        dense(FILM_WIDTH, cond_dim) + 2 * POST_WIDTH as u64 * ELEM
    } else {
        0
    };
    let glu = dense(FILM_WIDTH, POST_WIDTH) + POST_WIDTH as u64 * (SOFTSIGN + ELEM);
    film + glu
}

/// Exact trainable scalar count (complex parameters count twice).
pub fn count_params(model: &Model) -> usize {
    model.weights().num_scalars()
}

/// Per-sample floating-point operations under [`FLOPS_CONVENTION`].
pub fn count_flops(model: &Model) -> FlopsBreakdown {
    let arch = model.architecture();
    let projection = dense(arch.proj_width(), arch.proj_inputs());
    let recurrent_layer = recurrent(arch);
    let post_layer = dense(POST_WIDTH, arch.core_width())
        + if arch.is_ssm() {
            POST_WIDTH as u64 * TRANSCENDENTAL
        } else {
            0
        };
    let conditioning_block = conditioning(model.config().cond_dim);
    let output_layer = dense(1, POST_WIDTH);
    let reference_total = REFERENCE_FLOPS
        .iter()
        .find(|(a, _)| *a == arch)
        .map(|(_, v)| *v)
        .unwrap_or_default();
    FlopsBreakdown {
        architecture: arch,
        projection,
        recurrent_layer,
        post_layer,
        conditioning_block,
        output_layer,
        total: projection + recurrent_layer + post_layer + conditioning_block + output_layer,
        convention: FLOPS_CONVENTION,
        reference_total,
        reference_conditioning: REFERENCE_CONDITIONING_FLOPS,
    }
}
