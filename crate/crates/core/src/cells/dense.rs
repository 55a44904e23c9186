use rand::Rng;

use super::{check_len, InputWindow};
use crate::error::Result;
use crate::numerics::Matrix;

/// Affine map `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: Matrix::zeros(outputs, 1),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(outputs: usize, inputs: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(outputs, inputs);
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        for w in d.weight.as_mut_slice() {
            *w = rng.random_range(-limit..limit);
        }
        d
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("dense input", x.len(), self.inputs())?;
        let mut out = vec![0.0; self.outputs()];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.weight.matvec_into(x, out);
        for (o, b) in out.iter_mut().zip(self.bias.as_slice()) {
            *o += b;
        }
    }

    /// Accumulates parameter gradients into `grad`; adds `W^T dy` into `dx` when given.
    #[inline]
    pub(crate) fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        grad.weight.add_outer(dy, x);
        for (g, d) in grad.bias.as_mut_slice().iter_mut().zip(dy) {
            *g += d;
        }
        if let Some(dx) = dx {
            self.weight.matvec_t_acc(dy, dx);
        }
    }
}

/// Linear projection of an input window, `u = W_l x + b_l`.
pub fn project_input(proj: &Dense, window: &InputWindow) -> Result<Vec<f64>> {
    proj.forward(window.as_slice())
}
