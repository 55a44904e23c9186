use super::GradientSet;
use crate::error::{Error, Result};
use crate::model::ModelWeights;

/// Scales all gradients by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(g: &mut GradientSet, max_norm: f64) -> f64 {
    let norm = g.global_norm();
    if norm > max_norm {
        g.scale(max_norm / norm);
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates over the flattened weights, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamMoments {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }
}

/// One bias-corrected Adam step; increments `moments.t` first.
pub fn adam_update(
    weights: &mut ModelWeights,
    g: &GradientSet,
    moments: &mut AdamMoments,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = weights.num_scalars();
    if moments.m.len() != n || g.0.num_scalars() != n {
        return Err(Error::Dimension(format!(
            "optimizer state for {} scalars, weights have {n}",
            moments.m.len()
        )));
    }
    moments.t += 1;
    let t = moments.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut i = 0;
    for ((_, w), (_, gm)) in weights.tensors_mut().into_iter().zip(g.0.tensors()) {
        for (x, &gi) in w.as_mut_slice().iter_mut().zip(gm.as_slice()) {
            let m = &mut moments.m[i];
            let v = &mut moments.v[i];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            i += 1;
        }
    }
    Ok(())
}
