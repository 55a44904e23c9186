use super::normal;
use rand::Rng;

use super::dense::Dense;
use super::{check_len, SSM_STATES as N, SSM_WIDTH as W};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softplus, Matrix};

/// Selective state-space layer: step size, input map and readout all depend
/// on the current input.
///
/// Per step, with `delta = softplus(w_dt . u + b_dt)` and `A = -exp(a_log)`:
/// `h = exp(delta*A)*h + (exp(delta*A) - 1)/A * beta(u) * (E u)`,
/// `o = F (kappa(u) * h) + D*u`, where `beta`, `kappa` are affine in `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct S6Cell {
    /// Step-size map, `1 x 6`.
    pub dt: Dense,
    pub a_log: Matrix,
    /// Input-dependent gain on the state input, `12 x 6`.
    pub beta: Dense,
    /// Input-dependent gain on the readout, `12 x 6`.
    pub kappa: Dense,
    pub e: Matrix,
    pub f: Matrix,
    pub d: Matrix,
}

/// Discretized matrices in effect for one input sample.
#[derive(Clone, Debug, PartialEq)]
pub struct S6StepMatrices {
    pub delta: f64,
    pub a_bar: [f64; N],
    /// `12 x 6`, row-major.
    pub b_bar: Vec<f64>,
    /// `6 x 12`, row-major.
    pub c: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct S6Trace {
    pub z: f64,
    pub delta: f64,
    pub h_prev: [f64; N],
    pub h: [f64; N],
    pub a_bar: [f64; N],
    pub coef: [f64; N],
    pub beta: [f64; N],
    pub kappa: [f64; N],
    pub v: [f64; N],
    pub s: [f64; N],
}

impl S6Cell {
    pub fn zeros() -> Self {
        Self {
            dt: Dense::zeros(1, W),
            a_log: Matrix::zeros(N, 1),
            beta: Dense::zeros(N, W),
            kappa: Dense::zeros(N, W),
            e: Matrix::zeros(N, W),
            f: Matrix::zeros(W, N),
            d: Matrix::zeros(W, 1),
        }
    }

    /// Real poles `-(k+1)`, step size near `dt0`, unit gains.
    pub fn init<R: Rng>(rng: &mut R, dt0: f64) -> Self {
        let mut cell = Self {
            dt: Dense::glorot(1, W, rng),
            a_log: Matrix::zeros(N, 1),
            beta: Dense::glorot(N, W, rng),
            kappa: Dense::glorot(N, W, rng),
            e: Dense::glorot(N, W, rng).weight,
            f: Dense::glorot(W, N, rng).weight,
            d: Matrix::zeros(W, 1),
        };
        cell.dt.weight.scale(0.1);
        cell.dt.bias.set(0, 0, dt0.exp_m1().ln());
        for k in 0..N {
            cell.a_log.set(k, 0, ((k + 1) as f64).ln());
        }
        cell.beta.weight.scale(0.1);
        cell.kappa.weight.scale(0.1);
        cell.beta.bias.fill(1.0);
        cell.kappa.bias.fill(1.0);
        for w in cell.d.as_mut_slice() {
            *w = normal(rng);
        }
        cell
    }

    pub fn poles(&self) -> [f64; N] {
        let mut a = [0.0; N];
        for (k, v) in a.iter_mut().enumerate() {
            *v = -self.a_log.get(k, 0).exp();
        }
        a
    }

    /// The matrices `(A_bar, B_bar, C)` this layer applies for input `u`.
    pub fn step_matrices(&self, u: &[f64]) -> Result<S6StepMatrices> {
        check_len("S6 input", u.len(), W)?;
        let mut h = [0.0; N];
        let mut out = [0.0; W];
        let mut t = S6Trace::default();
        self.step_traced(&self.poles(), &mut h, u, &mut out, Some(&mut t));
        let mut b_bar = vec![0.0; N * W];
        for k in 0..N {
            let g = t.coef[k] * t.beta[k];
            for j in 0..W {
                b_bar[k * W + j] = g * self.e.get(k, j);
            }
        }
        let mut c = vec![0.0; W * N];
        for j in 0..W {
            for k in 0..N {
                c[j * N + k] = self.f.get(j, k) * t.kappa[k];
            }
        }
        Ok(S6StepMatrices {
            delta: t.delta,
            a_bar: t.a_bar,
            b_bar,
            c,
        })
    }

    pub fn step(&self, h: &[f64; N], u: &[f64]) -> Result<([f64; N], [f64; W])> {
        check_len("S6 input", u.len(), W)?;
        if h.iter().chain(u).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite S6 state or input".into()));
        }
        let mut next = *h;
        let mut out = [0.0; W];
        self.step_traced(&self.poles(), &mut next, u, &mut out, None);
        if next.iter().chain(&out).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("S6 step produced non-finite values".into()));
        }
        Ok((next, out))
    }

    #[inline]
    pub(crate) fn step_traced(
        &self,
        a: &[f64; N],
        h: &mut [f64; N],
        u: &[f64],
        out: &mut [f64; W],
        trace: Option<&mut S6Trace>,
    ) {
        let mut t = S6Trace {
            h_prev: *h,
            ..Default::default()
        };
        let mut z = [0.0];
        self.dt.forward_into(u, &mut z);
        t.z = z[0];
        t.delta = softplus(t.z);
        self.beta.forward_into(u, &mut t.beta);
        self.kappa.forward_into(u, &mut t.kappa);
        self.e.matvec_into(u, &mut t.v);
        for k in 0..N {
            let x = t.delta * a[k];
            t.a_bar[k] = x.exp();
            t.coef[k] = x.exp_m1() / a[k];
            h[k] = t.a_bar[k] * h[k] + t.coef[k] * t.beta[k] * t.v[k];
            t.s[k] = t.kappa[k] * h[k];
        }
        self.f.matvec_into(&t.s, out);
        for ((o, d), x) in out.iter_mut().zip(self.d.as_slice()).zip(u) {
            *o += d * x;
        }
        if let Some(tr) = trace {
            t.h = *h;
            *tr = t;
        }
    }

    pub(crate) fn backward_seq(
        &self,
        a: &[f64; N],
        traces: &[S6Trace],
        inputs: &[f64],
        d_out: &[f64],
        grad: &mut S6Cell,
        d_in: &mut [f64],
    ) {
        let mut carry = [0.0; N];
        let mut g_a = [0.0; N];
        for (t, tr) in traces.iter().enumerate().rev() {
            let dout = &d_out[t * W..(t + 1) * W];
            let u = &inputs[t * W..(t + 1) * W];
            let du = &mut d_in[t * W..(t + 1) * W];
            for j in 0..W {
                grad.d.as_mut_slice()[j] += dout[j] * u[j];
                du[j] += self.d.get(j, 0) * dout[j];
            }
            grad.f.add_outer(dout, &tr.s);
            let mut ds = [0.0; N];
            self.f.matvec_t_acc(dout, &mut ds);
            let mut dkappa = [0.0; N];
            let mut dbeta = [0.0; N];
            let mut dv = [0.0; N];
            let mut ddelta = 0.0;
            for k in 0..N {
                dkappa[k] = ds[k] * tr.h[k];
                let gh = carry[k] + ds[k] * tr.kappa[k];
                carry[k] = gh * tr.a_bar[k];
                let dcoef = gh * tr.beta[k] * tr.v[k];
                dbeta[k] = gh * tr.coef[k] * tr.v[k];
                dv[k] = gh * tr.coef[k] * tr.beta[k];
                let dabar = gh * tr.h_prev[k] + dcoef / a[k];
                ddelta += dabar * a[k] * tr.a_bar[k];
                g_a[k] += dabar * tr.delta * tr.a_bar[k] - dcoef * tr.coef[k] / a[k];
            }
            let dz = [ddelta * sigmoid(tr.z)];
            self.dt.backward(u, &dz, &mut grad.dt, Some(&mut *du));
            self.beta
                .backward(u, &dbeta, &mut grad.beta, Some(&mut *du));
            self.kappa
                .backward(u, &dkappa, &mut grad.kappa, Some(&mut *du));
            grad.e.add_outer(&dv, u);
            self.e.matvec_t_acc(&dv, du);
        }
        for k in 0..N {
            grad.a_log.as_mut_slice()[k] += g_a[k] * a[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::s4d::diag_ssm_step;
    use super::*;
    use crate::numerics::Complex64;
    use rand::SeedableRng;

    fn random_cell(seed: u64) -> S6Cell {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cell = S6Cell::init(&mut rng, 0.05);
        for m in [
            &mut cell.beta.weight,
            &mut cell.kappa.weight,
            &mut cell.dt.weight,
        ] {
            for w in m.as_mut_slice() {
                *w = rng.random_range(-1.0..1.0);
            }
        }
        cell
    }

    #[test]
    fn zero_input_map_leaves_state_untouched() {
        let mut cell = random_cell(3);
        cell.beta = Dense::zeros(N, W);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut h = [0.0; N];
        for _ in 0..30 {
            let u: Vec<f64> = (0..W).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (next, o) = cell.step(&h, &u).unwrap();
            h = next;
            assert_eq!(h, [0.0; N]);
            for j in 0..W {
                assert_eq!(o[j], cell.d.get(j, 0) * u[j]);
            }
        }
    }

    #[test]
    fn constant_input_reduces_to_s4d() {
        let cell = random_cell(9);
        let u = [0.3, -0.1, 0.5, 0.2, -0.7, 0.05];
        let m = cell.step_matrices(&u).unwrap();
        let c = |x: f64| Complex64::new(x, 0.0);
        let a_bar: Vec<Complex64> = m.a_bar.iter().map(|&x| c(x)).collect();
        let b_bar: Vec<Complex64> = m.b_bar.iter().map(|&x| c(x)).collect();
        let cm: Vec<Complex64> = m.c.iter().map(|&x| c(x)).collect();
        let mut h6 = [0.0; N];
        let mut h4 = vec![c(0.0); N];
        for _ in 0..200 {
            let (next, o6) = cell.step(&h6, &u).unwrap();
            h6 = next;
            let o4 = diag_ssm_step(&a_bar, &b_bar, &cm, cell.d.as_slice(), &mut h4, &u).unwrap();
            for j in 0..W {
                assert!((o6[j] - o4[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn matches_step_by_step_oracle() {
        let cell = random_cell(11);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut h = [0.0; N];
        let mut oh = [0.0; N];
        for _ in 0..50 {
            let u: Vec<f64> = (0..W).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (next, o) = cell.step(&h, &u).unwrap();
            h = next;

            let mut z = cell.dt.bias.get(0, 0);
            for j in 0..W {
                z += cell.dt.weight.get(0, j) * u[j];
            }
            let delta = (1.0 + z.exp()).ln();
            let mut s = [0.0; N];
            for k in 0..N {
                let a = -cell.a_log.get(k, 0).exp();
                let (mut beta, mut kappa, mut v) =
                    (cell.beta.bias.get(k, 0), cell.kappa.bias.get(k, 0), 0.0);
                for j in 0..W {
                    beta += cell.beta.weight.get(k, j) * u[j];
                    kappa += cell.kappa.weight.get(k, j) * u[j];
                    v += cell.e.get(k, j) * u[j];
                }
                let abar = (delta * a).exp();
                oh[k] = abar * oh[k] + (abar - 1.0) / a * beta * v;
                s[k] = kappa * oh[k];
            }
            for j in 0..W {
                let mut expect = cell.d.get(j, 0) * u[j];
                for k in 0..N {
                    expect += cell.f.get(j, k) * s[k];
                }
                assert!((o[j] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn discrete_poles_inside_unit_interval() {
        let cell = random_cell(2);
        let m = cell
            .step_matrices(&[1.0, -1.0, 0.5, 0.0, 0.3, 0.2])
            .unwrap();
        assert!(m.delta > 0.0);
        assert!(m.a_bar.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}
