use rand::Rng;

use super::{check_len, LSTM_INPUT as IN, LSTM_UNITS as H};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix};

const GATES: usize = 4 * H;
// Row blocks of the stacked gate matrices.
const F: usize = 0;
const I: usize = H;
const O: usize = 2 * H;
const C: usize = 3 * H;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LstmState {
    pub h: [f64; H],
    pub c: [f64; H],
}

impl LstmState {
    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|x| x.is_finite())
    }
}

/// LSTM layer with stacked gates `[forget, input, output, candidate]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    /// Recurrent weights, `32 x 8`.
    pub w_h: Matrix,
    /// Input weights, `32 x 4`.
    pub w_u: Matrix,
    pub bias: Matrix,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct LstmTrace {
    pub h_prev: [f64; H],
    pub c_prev: [f64; H],
    pub f: [f64; H],
    pub i: [f64; H],
    pub o: [f64; H],
    pub cand: [f64; H],
    pub tanh_c: [f64; H],
}

impl LstmCell {
    pub fn zeros() -> Self {
        Self {
            w_h: Matrix::zeros(GATES, H),
            w_u: Matrix::zeros(GATES, IN),
            bias: Matrix::zeros(GATES, 1),
        }
    }

    /// Glorot-uniform weights with unit forget bias.
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        let mut cell = Self::zeros();
        let lim_u = (6.0 / (IN + GATES) as f64).sqrt();
        let lim_h = (6.0 / (H + GATES) as f64).sqrt();
        for w in cell.w_u.as_mut_slice() {
            *w = rng.random_range(-lim_u..lim_u);
        }
        for w in cell.w_h.as_mut_slice() {
            *w = rng.random_range(-lim_h..lim_h);
        }
        for b in &mut cell.bias.as_mut_slice()[F..F + H] {
            *b = 1.0;
        }
        cell
    }

    /// One checked step: returns the new state and the hidden output.
    pub fn step(&self, state: &LstmState, u: &[f64]) -> Result<(LstmState, [f64; H])> {
        check_len("lstm input", u.len(), IN)?;
        if !state.is_finite() {
            return Err(Error::Numeric(format!("non-finite LSTM state {state:?}")));
        }
        let mut next = *state;
        self.step_traced(&mut next, u, None);
        if !next.is_finite() {
            return Err(Error::Numeric(format!(
                "LSTM step produced non-finite state from input {u:?}"
            )));
        }
        Ok((next, next.h))
    }

    #[inline]
    pub(crate) fn step_traced(&self, st: &mut LstmState, u: &[f64], trace: Option<&mut LstmTrace>) {
        let mut a = [0.0; GATES];
        let b = self.bias.as_slice();
        for (r, ar) in a.iter_mut().enumerate() {
            let mut acc = b[r];
            for (w, x) in self.w_h.row(r).iter().zip(&st.h) {
                acc += w * x;
            }
            for (w, x) in self.w_u.row(r).iter().zip(u) {
                acc += w * x;
            }
            *ar = acc;
        }
        let mut t = LstmTrace {
            h_prev: st.h,
            c_prev: st.c,
            ..Default::default()
        };
        for k in 0..H {
            t.f[k] = sigmoid(a[F + k]);
            t.i[k] = sigmoid(a[I + k]);
            t.o[k] = sigmoid(a[O + k]);
            t.cand[k] = a[C + k].tanh();
            st.c[k] = t.f[k] * st.c[k] + t.i[k] * t.cand[k];
            t.tanh_c[k] = st.c[k].tanh();
            st.h[k] = t.o[k] * t.tanh_c[k];
        }
        if let Some(out) = trace {
            *out = t;
        }
    }

    /// Backpropagates one step. `dh`/`dc_in` are the total gradients reaching
    /// this step's outputs; returns the gradients for the previous state and
    /// adds the input gradient into `du`.
    #[inline]
    pub(crate) fn backward_step(
        &self,
        t: &LstmTrace,
        u: &[f64],
        dh: &[f64; H],
        dc_in: &[f64; H],
        grad: &mut LstmCell,
        du: &mut [f64],
    ) -> ([f64; H], [f64; H]) {
        let mut da = [0.0; GATES];
        let mut dc_prev = [0.0; H];
        for k in 0..H {
            let d_o = dh[k] * t.tanh_c[k];
            let dc = dc_in[k] + dh[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
            let df = dc * t.c_prev[k];
            let di = dc * t.cand[k];
            let dcand = dc * t.i[k];
            dc_prev[k] = dc * t.f[k];
            da[F + k] = df * t.f[k] * (1.0 - t.f[k]);
            da[I + k] = di * t.i[k] * (1.0 - t.i[k]);
            da[O + k] = d_o * t.o[k] * (1.0 - t.o[k]);
            da[C + k] = dcand * (1.0 - t.cand[k] * t.cand[k]);
        }
        grad.w_h.add_outer(&da, &t.h_prev);
        grad.w_u.add_outer(&da, u);
        for (g, d) in grad.bias.as_mut_slice().iter_mut().zip(&da) {
            *g += d;
        }
        let mut dh_prev = [0.0; H];
        self.w_h.matvec_t_acc(&da, &mut dh_prev);
        self.w_u.matvec_t_acc(&da, du);
        (dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Scalar-loop LSTM written straight from the gate equations.
    fn oracle_step(cell: &LstmCell, h: &[f64], c: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gate = |block: usize, k: usize| {
            let r = block * H + k;
            let mut acc = cell.bias.get(r, 0);
            for j in 0..H {
                acc += cell.w_h.get(r, j) * h[j];
            }
            for j in 0..IN {
                acc += cell.w_u.get(r, j) * u[j];
            }
            acc
        };
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut hn = vec![0.0; H];
        let mut cn = vec![0.0; H];
        for k in 0..H {
            let f = sig(gate(0, k));
            let i = sig(gate(1, k));
            let o = sig(gate(2, k));
            let cc = gate(3, k).tanh();
            cn[k] = f * c[k] + i * cc;
            hn[k] = o * cn[k].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_weights_fixed_point() {
        let cell = LstmCell::zeros();
        let (s, h) = cell
            .step(&LstmState::default(), &[0.3, -0.2, 0.1, 0.9])
            .unwrap();
        assert_eq!(h, [0.0; H]);
        assert_eq!(s.c, [0.0; H]);
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut cell = LstmCell::zeros();
        for k in 0..H {
            cell.bias.set(F + k, 0, 1e3);
            cell.bias.set(I + k, 0, -1e3);
        }
        let prev = LstmState {
            h: [0.0; H],
            c: [0.25, -0.5, 0.75, 1.5, -2.0, 0.1, 0.0, 3.0],
        };
        let (s, _) = cell.step(&prev, &[1.0, -1.0, 0.5, 0.2]).unwrap();
        for k in 0..H {
            assert!((s.c[k] - prev.c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let mut cell = LstmCell::init(&mut rng);
            for b in cell.bias.as_mut_slice() {
                *b += rng.random_range(-1.0..1.0);
            }
            let mut st = LstmState::default();
            for k in 0..H {
                st.h[k] = rng.random_range(-1.0..1.0);
                st.c[k] = rng.random_range(-2.0..2.0);
            }
            let u: Vec<f64> = (0..IN).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (next, h) = cell.step(&st, &u).unwrap();
            let (oh, oc) = oracle_step(&cell, &st.h, &st.c, &u);
            for k in 0..H {
                assert!((h[k] - oh[k]).abs() < 1e-12);
                assert!((next.c[k] - oc[k]).abs() < 1e-12);
                assert!(h[k] > -1.0 && h[k] < 1.0);
            }
        }
    }

    #[test]
    fn non_finite_state_rejected() {
        let cell = LstmCell::zeros();
        let mut st = LstmState::default();
        st.c[3] = f64::NAN;
        assert!(matches!(cell.step(&st, &[0.0; IN]), Err(Error::Numeric(_))));
        assert!(cell.step(&LstmState::default(), &[0.0; 3]).is_err());
    }
}
