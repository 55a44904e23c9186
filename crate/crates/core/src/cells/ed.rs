use rand::Rng;

use super::lstm::{LstmCell, LstmState, LstmTrace};
use super::{check_len, ED_HALF, LSTM_UNITS as H};
use crate::error::Result;
use crate::numerics::{sigmoid, Matrix};

/// Kernel length and stride of the encoder convolutions: 32 samples in, 8 out.
pub const ENC_KERNEL: usize = ED_HALF / H;

/// Single-channel 1-D convolution with kernel 4, stride 4 and no padding,
/// mapping the 32-sample encoder half onto 8 values.
#[derive(Clone, Debug, PartialEq)]
pub struct StridedConv {
    pub kernel: Matrix,
    pub bias: Matrix,
}

impl StridedConv {
    pub fn zeros() -> Self {
        Self {
            kernel: Matrix::zeros(1, ENC_KERNEL),
            bias: Matrix::zeros(1, 1),
        }
    }

    pub fn init<R: Rng>(rng: &mut R) -> Self {
        let mut c = Self::zeros();
        let lim = (6.0 / (ENC_KERNEL + 1) as f64).sqrt();
        for w in c.kernel.as_mut_slice() {
            *w = rng.random_range(-lim..lim);
        }
        c
    }

    #[inline]
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64; H]) {
        let k = self.kernel.as_slice();
        let b = self.bias.as_slice()[0];
        for (j, o) in out.iter_mut().enumerate() {
            let seg = &x[j * ENC_KERNEL..(j + 1) * ENC_KERNEL];
            *o = b + seg.iter().zip(k).map(|(a, w)| a * w).sum::<f64>();
        }
    }

    #[inline]
    fn backward(&self, x: &[f64], dout: &[f64; H], grad: &mut StridedConv) {
        let gk = grad.kernel.as_mut_slice();
        let mut gb = 0.0;
        for (j, d) in dout.iter().enumerate() {
            gb += d;
            for (t, g) in gk.iter_mut().enumerate() {
                *g += d * x[j * ENC_KERNEL + t];
            }
        }
        grad.bias.as_mut_slice()[0] += gb;
    }
}

/// Encoder-decoder LSTM: two convolutions over the older half of the window
/// propose states that are gated into the LSTM state before every step.
#[derive(Clone, Debug, PartialEq)]
pub struct EdCell {
    pub enc_h: StridedConv,
    pub enc_c: StridedConv,
    pub lstm: LstmCell,
}

/// Candidate states `(h, c)` from the encoder half `[x[n-32] .. x[n-63]]`.
pub fn ed_encode(
    enc_h: &StridedConv,
    enc_c: &StridedConv,
    x_e: &[f64],
) -> Result<([f64; H], [f64; H])> {
    check_len("encoder half", x_e.len(), ED_HALF)?;
    let mut h = [0.0; H];
    let mut c = [0.0; H];
    enc_h.apply(x_e, &mut h);
    enc_c.apply(x_e, &mut c);
    Ok((h, c))
}

/// `[h, c] = sigmoid([h_prev, c_prev]) * [cand_h, cand_c]`.
pub fn ed_state_merge(prev: &LstmState, cand_h: &[f64], cand_c: &[f64]) -> Result<LstmState> {
    check_len("candidate h", cand_h.len(), H)?;
    check_len("candidate c", cand_c.len(), H)?;
    let mut out = LstmState::default();
    for k in 0..H {
        out.h[k] = sigmoid(prev.h[k]) * cand_h[k];
        out.c[k] = sigmoid(prev.c[k]) * cand_c[k];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct EdTrace {
    pub sig_h: [f64; H],
    pub sig_c: [f64; H],
    pub cand_h: [f64; H],
    pub cand_c: [f64; H],
    pub lstm: LstmTrace,
}

impl EdCell {
    pub fn zeros() -> Self {
        Self {
            enc_h: StridedConv::zeros(),
            enc_c: StridedConv::zeros(),
            lstm: LstmCell::zeros(),
        }
    }

    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self {
            enc_h: StridedConv::init(rng),
            enc_c: StridedConv::init(rng),
            lstm: LstmCell::init(rng),
        }
    }

    /// Checked step on decoder projection `u` and encoder half `x_e`.
    pub fn step(&self, state: &LstmState, u: &[f64], x_e: &[f64]) -> Result<(LstmState, [f64; H])> {
        let (ch, cc) = ed_encode(&self.enc_h, &self.enc_c, x_e)?;
        let merged = ed_state_merge(state, &ch, &cc)?;
        self.lstm.step(&merged, u)
    }

    #[inline]
    pub(crate) fn step_traced(
        &self,
        st: &mut LstmState,
        u: &[f64],
        x_e: &[f64],
        trace: Option<&mut EdTrace>,
    ) {
        let mut t = EdTrace::default();
        self.enc_h.apply(x_e, &mut t.cand_h);
        self.enc_c.apply(x_e, &mut t.cand_c);
        for k in 0..H {
            t.sig_h[k] = sigmoid(st.h[k]);
            t.sig_c[k] = sigmoid(st.c[k]);
            st.h[k] = t.sig_h[k] * t.cand_h[k];
            st.c[k] = t.sig_c[k] * t.cand_c[k];
        }
        match trace {
            Some(out) => {
                self.lstm.step_traced(st, u, Some(&mut t.lstm));
                *out = t;
            }
            None => self.lstm.step_traced(st, u, None),
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward_step(
        &self,
        t: &EdTrace,
        u: &[f64],
        x_e: &[f64],
        dh: &[f64; H],
        dc: &[f64; H],
        grad: &mut EdCell,
        du: &mut [f64],
    ) -> ([f64; H], [f64; H]) {
        let (dmh, dmc) = self
            .lstm
            .backward_step(&t.lstm, u, dh, dc, &mut grad.lstm, du);
        let mut dcand_h = [0.0; H];
        let mut dcand_c = [0.0; H];
        let mut dh_prev = [0.0; H];
        let mut dc_prev = [0.0; H];
        for k in 0..H {
            dcand_h[k] = dmh[k] * t.sig_h[k];
            dcand_c[k] = dmc[k] * t.sig_c[k];
            dh_prev[k] = dmh[k] * t.cand_h[k] * t.sig_h[k] * (1.0 - t.sig_h[k]);
            dc_prev[k] = dmc[k] * t.cand_c[k] * t.sig_c[k] * (1.0 - t.sig_c[k]);
        }
        self.enc_h.backward(x_e, &dcand_h, &mut grad.enc_h);
        self.enc_c.backward(x_e, &dcand_c, &mut grad.enc_c);
        (dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_input_zero_candidates() {
        let c = StridedConv::init(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        let (h, cc) = ed_encode(&c, &c, &[0.0; ED_HALF]).unwrap();
        assert_eq!(h, [0.0; H]);
        assert_eq!(cc, [0.0; H]);
    }

    #[test]
    fn averaging_kernel_constant_input() {
        let mut c = StridedConv::zeros();
        c.kernel.fill(0.25);
        let kappa = -0.6;
        let (h, _) = ed_encode(&c, &c, &[kappa; ED_HALF]).unwrap();
        for v in h {
            assert!((v - kappa * 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn conv_matches_direct_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mut c = StridedConv::init(&mut rng);
            c.bias.as_mut_slice()[0] = rng.random_range(-1.0..1.0);
            let x: Vec<f64> = (0..ED_HALF).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, _) = ed_encode(&c, &c, &x).unwrap();
            for j in 0..H {
                let mut acc = c.bias.get(0, 0);
                for t in 0..ENC_KERNEL {
                    acc += c.kernel.get(0, t) * x[ENC_KERNEL * j + t];
                }
                assert!((h[j] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_limits() {
        let cand_h = [1.0, -2.0, 3.0, 0.5, 0.0, 1.0, 2.0, -1.0];
        let cand_c = [0.2; H];
        let m = ed_state_merge(&LstmState::default(), &cand_h, &cand_c).unwrap();
        for k in 0..H {
            assert_eq!(m.h[k], 0.5 * cand_h[k]);
            assert_eq!(m.c[k], 0.5 * cand_c[k]);
        }
        let neg = LstmState {
            h: [-1e3; H],
            c: [-1e3; H],
        };
        let m = ed_state_merge(&neg, &cand_h, &cand_c).unwrap();
        assert!(m.h.iter().chain(&m.c).all(|v| v.abs() < 1e-300));
    }

    #[test]
    fn merge_matches_elementwise_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let mut prev = LstmState::default();
            let mut ch = [0.0; H];
            let mut cc = [0.0; H];
            for k in 0..H {
                prev.h[k] = rng.random_range(-3.0..3.0);
                prev.c[k] = rng.random_range(-3.0..3.0);
                ch[k] = rng.random_range(-1.0..1.0);
                cc[k] = rng.random_range(-1.0..1.0);
            }
            let m = ed_state_merge(&prev, &ch, &cc).unwrap();
            for k in 0..H {
                let sh = 1.0 / (1.0 + (-prev.h[k]).exp());
                let sc = 1.0 / (1.0 + (-prev.c[k]).exp());
                assert!((m.h[k] - sh * ch[k]).abs() < 1e-15);
                assert!((m.c[k] - sc * cc[k]).abs() < 1e-15);
            }
        }
    }
}
