use std::f64::consts::PI;

use super::normal;
use rand::Rng;

use super::{check_len, SSM_STATES as N, SSM_WIDTH as W};
use crate::error::{Error, Result};
use crate::numerics::{Complex64, Matrix};

/// Linear recurrent unit with a complex diagonal recurrence.
///
/// Eigenvalues are `exp(-exp(nu) + i*theta)`, so `|lambda| < 1` holds for
/// any finite `nu`; the input path is scaled by `sqrt(1 - |lambda|^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LruCell {
    pub nu: Matrix,
    pub theta: Matrix,
    pub b_re: Matrix,
    pub b_im: Matrix,
    pub bh_re: Matrix,
    pub bh_im: Matrix,
    pub c_re: Matrix,
    pub c_im: Matrix,
    pub bias_o: Matrix,
}

/// Quantities derived from the trainable parameters, fixed while the weights are.
#[derive(Clone, Debug)]
pub struct LruKernel {
    pub lambda: [Complex64; N],
    pub gamma: [f64; N],
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LruTrace {
    pub h_prev: [Complex64; N],
    pub h: [Complex64; N],
    pub bu: [Complex64; N],
}

impl Default for LruTrace {
    fn default() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            h_prev: [z; N],
            h: [z; N],
            bu: [z; N],
        }
    }
}

/// Eigenvalue initialization ranges.
#[derive(Clone, Copy, Debug)]
pub struct LruInit {
    pub r_min: f64,
    pub r_max: f64,
    pub max_phase: f64,
}

impl Default for LruInit {
    fn default() -> Self {
        Self {
            r_min: 0.5,
            r_max: 0.99,
            max_phase: PI / 10.0,
        }
    }
}

impl LruCell {
    pub fn zeros() -> Self {
        Self {
            nu: Matrix::zeros(N, 1),
            theta: Matrix::zeros(N, 1),
            b_re: Matrix::zeros(N, W),
            b_im: Matrix::zeros(N, W),
            bh_re: Matrix::zeros(N, 1),
            bh_im: Matrix::zeros(N, 1),
            c_re: Matrix::zeros(W, N),
            c_im: Matrix::zeros(W, N),
            bias_o: Matrix::zeros(W, 1),
        }
    }

    pub fn init<R: Rng>(rng: &mut R, ranges: LruInit) -> Self {
        let mut cell = Self::zeros();
        for k in 0..N {
            let r: f64 = rng.random_range(ranges.r_min..ranges.r_max);
            let phase: f64 = rng.random_range(0.0..ranges.max_phase);
            cell.nu.set(k, 0, (-r.ln()).ln());
            cell.theta.set(k, 0, phase);
        }
        let sb = (1.0 / (2.0 * W as f64)).sqrt();
        let sc = (1.0 / N as f64).sqrt();
        for m in [&mut cell.b_re, &mut cell.b_im] {
            for w in m.as_mut_slice() {
                *w = sb * normal(rng);
            }
        }
        for m in [&mut cell.c_re, &mut cell.c_im] {
            for w in m.as_mut_slice() {
                *w = sc * normal(rng);
            }
        }
        cell
    }

    /// Sets the recurrence so that its eigenvalues are exactly `lambda`.
    pub fn set_eigenvalues(&mut self, lambda: &[Complex64]) -> Result<()> {
        check_len("LRU eigenvalues", lambda.len(), N)?;
        for (k, l) in lambda.iter().enumerate() {
            let r = l.norm();
            if !(r < 1.0) {
                return Err(Error::Stability(format!(
                    "LRU eigenvalue {k} has modulus {r} >= 1"
                )));
            }
            self.nu.set(k, 0, (-r.ln()).ln());
            self.theta.set(k, 0, l.im.atan2(l.re));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<LruKernel> {
        let z = Complex64::new(0.0, 0.0);
        let mut kern = LruKernel {
            lambda: [z; N],
            gamma: [0.0; N],
        };
        for k in 0..N {
            let nu = self.nu.get(k, 0);
            let mag = (-nu.exp()).exp();
            if !(mag < 1.0) || !mag.is_finite() {
                return Err(Error::Stability(format!(
                    "LRU eigenvalue {k} has modulus {mag} (nu = {nu})"
                )));
            }
            kern.lambda[k] = Complex64::from_polar(mag, self.theta.get(k, 0));
            kern.gamma[k] = (1.0 - mag * mag).sqrt();
        }
        Ok(kern)
    }

    /// Checked step from state `h` with projected input `u`.
    pub fn step(&self, h: &[Complex64; N], u: &[f64]) -> Result<([Complex64; N], [f64; W])> {
        check_len("LRU input", u.len(), W)?;
        let kern = self.kernel()?;
        let mut next = *h;
        let mut out = [0.0; W];
        self.step_traced(&kern, &mut next, u, &mut out, None);
        Ok((next, out))
    }

    #[inline]
    pub(crate) fn step_traced(
        &self,
        kern: &LruKernel,
        h: &mut [Complex64; N],
        u: &[f64],
        out: &mut [f64; W],
        trace: Option<&mut LruTrace>,
    ) {
        let mut bu = [Complex64::new(0.0, 0.0); N];
        let h_prev = *h;
        for k in 0..N {
            let (mut re, mut im) = (0.0, 0.0);
            for ((br, bi), x) in self.b_re.row(k).iter().zip(self.b_im.row(k)).zip(u) {
                re += br * x;
                im += bi * x;
            }
            bu[k] = Complex64::new(re, im);
            let bh = Complex64::new(self.bh_re.get(k, 0), self.bh_im.get(k, 0));
            h[k] = kern.lambda[k] * h[k] + bu[k] * kern.gamma[k] + bh;
        }
        readout(&self.c_re, &self.c_im, h, out);
        for (o, b) in out.iter_mut().zip(self.bias_o.as_slice()) {
            *o += b;
        }
        if let Some(t) = trace {
            t.h_prev = h_prev;
            t.h = *h;
            t.bu = bu;
        }
    }

    /// Reverse sweep over one segment.
    ///
    /// `d_out` holds `L x 6` output gradients, `d_in` receives `L x 6` input
    /// gradients. The state entering the segment is treated as a constant.
    pub(crate) fn backward_seq(
        &self,
        kern: &LruKernel,
        traces: &[LruTrace],
        inputs: &[f64],
        d_out: &[f64],
        grad: &mut LruCell,
        d_in: &mut [f64],
    ) {
        let zero = Complex64::new(0.0, 0.0);
        let mut carry = [zero; N];
        let mut g_lambda = [zero; N];
        let mut g_gamma = [0.0; N];
        for (t, tr) in traces.iter().enumerate().rev() {
            let dout = &d_out[t * W..(t + 1) * W];
            let u = &inputs[t * W..(t + 1) * W];
            let du = &mut d_in[t * W..(t + 1) * W];
            for (g, d) in grad.bias_o.as_mut_slice().iter_mut().zip(dout) {
                *g += d;
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
                g_lambda[k] += g * tr.h_prev[k].conj();
                grad.bh_re.as_mut_slice()[k] += g.re;
                grad.bh_im.as_mut_slice()[k] += g.im;
                g_gamma[k] += (g * tr.bu[k].conj()).re;
                let gbu = g * kern.gamma[k];
                let (gbr, gbi) = (grad.b_re.as_mut_slice(), grad.b_im.as_mut_slice());
                for j in 0..W {
                    gbr[k * W + j] += gbu.re * u[j];
                    gbi[k * W + j] += gbu.im * u[j];
                    du[j] += gbu.re * self.b_re.get(k, j) + gbu.im * self.b_im.get(k, j);
                }
                carry[k] = kern.lambda[k].conj() * g;
            }
        }
        for k in 0..N {
            let e = self.nu.get(k, 0).exp();
            let g_s = kern.lambda[k].conj() * g_lambda[k];
            let mag2 = kern.lambda[k].norm_sqr();
            let dgamma = if kern.gamma[k] > 0.0 {
                e * mag2 / kern.gamma[k]
            } else {
                0.0
            };
            grad.nu.as_mut_slice()[k] += -e * g_s.re + g_gamma[k] * dgamma;
            grad.theta.as_mut_slice()[k] += g_s.im;
        }
    }
}

/// `out = Re(C h)` for a complex `C` given as real/imaginary parts.
#[inline]
pub(crate) fn readout(c_re: &Matrix, c_im: &Matrix, h: &[Complex64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for ((cr, ci), z) in c_re.row(j).iter().zip(c_im.row(j)).zip(h) {
            acc += cr * z.re - ci * z.im;
        }
        *o = acc;
    }
}

#[inline]
pub(crate) fn readout_backward(
    c_re: &Matrix,
    c_im: &Matrix,
    h: &[Complex64],
    dout: &[f64],
    g_re: &mut Matrix,
    g_im: &mut Matrix,
    gh: &mut [Complex64],
) {
    let cols = c_re.cols();
    let (gr, gi) = (g_re.as_mut_slice(), g_im.as_mut_slice());
    for (j, &d) in dout.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for k in 0..cols {
            gr[j * cols + k] += d * h[k].re;
            gi[j * cols + k] -= d * h[k].im;
            gh[k] += Complex64::new(d * c_re.get(j, k), -d * c_im.get(j, k));
        }
    }
}
