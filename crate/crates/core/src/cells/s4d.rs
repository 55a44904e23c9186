use std::f64::consts::PI;

use super::normal;
use rand::Rng;

use super::lru::{readout, readout_backward};
use super::{check_len, SSM_STATES as N, SSM_WIDTH as W};
use crate::error::{Error, Result};
use crate::numerics::{complex_expm1, Complex64, ComplexVector, Matrix};

/// Diagonal state-space layer discretized with a zero-order hold.
///
/// Continuous poles are `A = -exp(a_log_re) + i*a_im`, step sizes
/// `delta = exp(log_dt)`, both trained in log space so `Re(A) < 0` always.
#[derive(Clone, Debug, PartialEq)]
pub struct S4dCell {
    pub a_log_re: Matrix,
    pub a_im: Matrix,
    pub b_re: Matrix,
    pub b_im: Matrix,
    pub c_re: Matrix,
    pub c_im: Matrix,
    pub d: Matrix,
    pub log_dt: Matrix,
}

#[derive(Clone, Debug)]
pub struct S4dKernel {
    pub a: [Complex64; N],
    pub delta: [f64; N],
    pub a_bar: [Complex64; N],
    pub coef: [Complex64; N],
    /// `N x 6`, row-major.
    pub b_bar: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct S4dTrace {
    pub h_prev: [Complex64; N],
    pub h: [Complex64; N],
}

impl Default for S4dTrace {
    fn default() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            h_prev: [z; N],
            h: [z; N],
        }
    }
}

/// Zero-order-hold discretization of a diagonal system:
/// `A_bar = exp(delta*A)`, `B_bar_k = (A_bar_k - 1) / A_k * B_k`.
///
/// `b` is `n x m` row-major. Returns `(A_bar, B_bar)`.
pub fn discretize_zoh(
    a: &[Complex64],
    b: &[Complex64],
    m: usize,
    delta: &[f64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = a.len();
    check_len("step sizes", delta.len(), n)?;
    check_len("input matrix", b.len(), n * m)?;
    let mut a_bar = Vec::with_capacity(n);
    let mut b_bar = Vec::with_capacity(n * m);
    for k in 0..n {
        if !(a[k].re < 0.0) {
            return Err(Error::Stability(format!(
                "pole {k} has non-negative real part {}",
                a[k].re
            )));
        }
        if !(delta[k] > 0.0) {
            return Err(Error::Input(format!(
                "step size {k} is {} (must be > 0)",
                delta[k]
            )));
        }
        let z = a[k] * delta[k];
        a_bar.push(z.exp());
        let coef = complex_expm1(z) / a[k];
        b_bar.extend(b[k * m..(k + 1) * m].iter().map(|x| coef * x));
    }
    Ok((a_bar, b_bar))
}

/// Discretizes diagonal poles `a_diag` with a real input matrix `b` (`n x m`).
pub fn s4d_discretize(
    a_diag: &ComplexVector,
    b: &Matrix,
    delta: &[f64],
) -> Result<(ComplexVector, Vec<Complex64>)> {
    check_len("input matrix rows", b.rows(), a_diag.len())?;
    let bc: Vec<Complex64> = b
        .as_slice()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    let (a_bar, b_bar) = discretize_zoh(&a_diag.to_complex(), &bc, b.cols(), delta)?;
    Ok((ComplexVector::from_complex(&a_bar), b_bar))
}

/// One step of a discretized diagonal system with diagonal feedthrough:
/// `h = A_bar*h + B_bar u`, `o = Re(C h) + d*u`.
///
/// `b_bar` is `n x m`, `c` is `m x n`, both row-major.
pub fn diag_ssm_step(
    a_bar: &[Complex64],
    b_bar: &[Complex64],
    c: &[Complex64],
    d: &[f64],
    h: &mut [Complex64],
    u: &[f64],
) -> Result<Vec<f64>> {
    let n = a_bar.len();
    let m = u.len();
    check_len("state", h.len(), n)?;
    check_len("input matrix", b_bar.len(), n * m)?;
    check_len("output matrix", c.len(), m * n)?;
    check_len("feedthrough", d.len(), m)?;
    for k in 0..n {
        let mut acc = a_bar[k] * h[k];
        for j in 0..m {
            acc += b_bar[k * m + j] * u[j];
        }
        h[k] = acc;
    }
    Ok((0..m)
        .map(|j| {
            let mut acc = d[j] * u[j];
            for k in 0..n {
                acc += (c[j * n + k] * h[k]).re;
            }
            acc
        })
        .collect())
}

impl S4dCell {
    pub fn zeros() -> Self {
        Self {
            a_log_re: Matrix::zeros(N, 1),
            a_im: Matrix::zeros(N, 1),
            b_re: Matrix::zeros(N, W),
            b_im: Matrix::zeros(N, W),
            c_re: Matrix::zeros(W, N),
            c_im: Matrix::zeros(W, N),
            d: Matrix::zeros(W, 1),
            log_dt: Matrix::zeros(N, 1),
        }
    }

    /// Linear-spaced poles `-1/2 + i*pi*k`, log-uniform step sizes in `dt_range`.
    pub fn init<R: Rng>(rng: &mut R, dt_range: (f64, f64)) -> Self {
        let mut cell = Self::zeros();
        let (lo, hi) = (dt_range.0.ln(), dt_range.1.ln());
        for k in 0..N {
            cell.a_log_re.set(k, 0, 0.5f64.ln());
            cell.a_im.set(k, 0, PI * k as f64);
            cell.log_dt.set(k, 0, rng.random_range(lo..hi));
        }
        let sb = (1.0 / W as f64).sqrt();
        let sc = (0.5 / N as f64).sqrt();
        for w in cell.b_re.as_mut_slice() {
            *w = sb * normal(rng);
        }
        for m in [&mut cell.c_re, &mut cell.c_im] {
            for w in m.as_mut_slice() {
                *w = sc * normal(rng);
            }
        }
        for w in cell.d.as_mut_slice() {
            *w = normal(rng);
        }
        cell
    }

    pub fn poles(&self) -> [Complex64; N] {
        let mut a = [Complex64::new(0.0, 0.0); N];
        for (k, z) in a.iter_mut().enumerate() {
            *z = Complex64::new(-self.a_log_re.get(k, 0).exp(), self.a_im.get(k, 0));
        }
        a
    }

    pub fn kernel(&self) -> Result<S4dKernel> {
        let a = self.poles();
        let mut delta = [0.0; N];
        for (k, d) in delta.iter_mut().enumerate() {
            *d = self.log_dt.get(k, 0).exp();
        }
        let b: Vec<Complex64> = self
            .b_re
            .as_slice()
            .iter()
            .zip(self.b_im.as_slice())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let (a_bar_v, b_bar) = discretize_zoh(&a, &b, W, &delta)?;
        let mut a_bar = [Complex64::new(0.0, 0.0); N];
        let mut coef = [Complex64::new(0.0, 0.0); N];
        for k in 0..N {
            if !(a_bar_v[k].norm() < 1.0) {
                return Err(Error::Stability(format!(
                    "discrete pole {k} has modulus {}",
                    a_bar_v[k].norm()
                )));
            }
            a_bar[k] = a_bar_v[k];
            coef[k] = complex_expm1(a[k] * delta[k]) / a[k];
        }
        Ok(S4dKernel {
            a,
            delta,
            a_bar,
            coef,
            b_bar,
        })
    }

    pub fn step(&self, h: &[Complex64; N], u: &[f64]) -> Result<([Complex64; N], [f64; W])> {
        check_len("S4D input", u.len(), W)?;
        let kern = self.kernel()?;
        let mut next = *h;
        let mut out = [0.0; W];
        self.step_traced(&kern, &mut next, u, &mut out, None);
        Ok((next, out))
    }

    #[inline]
    pub(crate) fn step_traced(
        &self,
        kern: &S4dKernel,
        h: &mut [Complex64; N],
        u: &[f64],
        out: &mut [f64; W],
        trace: Option<&mut S4dTrace>,
    ) {
        let h_prev = *h;
        for k in 0..N {
            let row = &kern.b_bar[k * W..(k + 1) * W];
            let (mut re, mut im) = (0.0, 0.0);
            for (b, x) in row.iter().zip(u) {
                re += b.re * x;
                im += b.im * x;
            }
            h[k] = kern.a_bar[k] * h[k] + Complex64::new(re, im);
        }
        readout(&self.c_re, &self.c_im, h, out);
        for ((o, d), x) in out.iter_mut().zip(self.d.as_slice()).zip(u) {
            *o += d * x;
        }
        if let Some(t) = trace {
            t.h_prev = h_prev;
            t.h = *h;
        }
    }

    pub(crate) fn backward_seq(
        &self,
        kern: &S4dKernel,
        traces: &[S4dTrace],
        inputs: &[f64],
        d_out: &[f64],
        grad: &mut S4dCell,
        d_in: &mut [f64],
    ) {
        let zero = Complex64::new(0.0, 0.0);
        let mut carry = [zero; N];
        let mut g_abar = [zero; N];
        let mut g_bbar = vec![zero; N * W];
        for (t, tr) in traces.iter().enumerate().rev() {
            let dout = &d_out[t * W..(t + 1) * W];
            let u = &inputs[t * W..(t + 1) * W];
            let du = &mut d_in[t * W..(t + 1) * W];
            for j in 0..W {
                grad.d.as_mut_slice()[j] += dout[j] * u[j];
                du[j] += self.d.get(j, 0) * dout[j];
            }
            let mut gh = carry;
            readout_backward(
                &self.c_re,
                &self.c_im,
                &tr.h,
                dout,
                &mut grad.c_re,
                &mut grad.c_im,
                &mut gh,
            );
            for k in 0..N {
                let g = gh[k];
                g_abar[k] += g * tr.h_prev[k].conj();
                for j in 0..W {
                    g_bbar[k * W + j] += g * u[j];
                    let b = kern.b_bar[k * W + j];
                    du[j] += g.re * b.re + g.im * b.im;
                }
                carry[k] = kern.a_bar[k].conj() * g;
            }
        }
        for k in 0..N {
            let a = kern.a[k];
            let dt = kern.delta[k];
            let ab = kern.a_bar[k];
            let mut g_coef = zero;
            for j in 0..W {
                let b = Complex64::new(self.b_re.get(k, j), self.b_im.get(k, j));
                let g = g_bbar[k * W + j];
                g_coef += g * b.conj();
                let gb = kern.coef[k].conj() * g;
                grad.b_re.as_mut_slice()[k * W + j] += gb.re;
                grad.b_im.as_mut_slice()[k * W + j] += gb.im;
            }
            let dcoef_da = (ab * a * dt - complex_expm1(a * dt)) / (a * a);
            let g_a = (ab * dt).conj() * g_abar[k] + dcoef_da.conj() * g_coef;
            let g_dt = (g_abar[k] * (a * ab).conj()).re + (g_coef * ab.conj()).re;
            grad.a_log_re.as_mut_slice()[k] += g_a.re * a.re;
            grad.a_im.as_mut_slice()[k] += g_a.im;
            grad.log_dt.as_mut_slice()[k] += g_dt * dt;
        }
    }
}
