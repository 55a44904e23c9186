use rand::Rng;

use super::{Architecture, ModelConfig, FILM_WIDTH};
use crate::cells::{Dense, EdCell, LruCell, LruInit, LstmCell, S4dCell, S6Cell, POST_WIDTH};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Default step-size range for S4D initialization.
pub(crate) const S4D_DT_RANGE: (f64, f64) = (1e-3, 1e-1);
/// Default initial step size for S6.
pub(crate) const S6_DT0: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub enum CoreWeights {
    Lstm(LstmCell),
    Ed(EdCell),
    Lru(LruCell),
    S4d(S4dCell),
    S6(S6Cell),
}

/// FiLM map `P -> 8` (absent when `P = 0`) followed by the GLU map `4 -> 8`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningBlock {
    pub film: Option<Dense>,
    pub glu: Dense,
}

/// Every trainable array of a network. Also used, zero-initialized, as the
/// gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub proj: Dense,
    pub core: CoreWeights,
    pub post: Dense,
    pub cond: ConditioningBlock,
    pub out: Dense,
}

macro_rules! named_tensors {
    ($w:expr $(, $m:tt)?) => {{
        let w = $w;
        let mut v: Vec<(&'static str, &$($m)? Matrix)> =
            vec![("proj.weight", &$($m)? w.proj.weight), ("proj.bias", &$($m)? w.proj.bias)];
        match &$($m)? w.core {
            CoreWeights::Lstm(c) => v.extend([
                ("lstm.w_h", &$($m)? c.w_h),
                ("lstm.w_u", &$($m)? c.w_u),
                ("lstm.bias", &$($m)? c.bias),
            ]),
            CoreWeights::Ed(c) => v.extend([
                ("ed.enc_h.kernel", &$($m)? c.enc_h.kernel),
                ("ed.enc_h.bias", &$($m)? c.enc_h.bias),
                ("ed.enc_c.kernel", &$($m)? c.enc_c.kernel),
                ("ed.enc_c.bias", &$($m)? c.enc_c.bias),
                ("ed.lstm.w_h", &$($m)? c.lstm.w_h),
                ("ed.lstm.w_u", &$($m)? c.lstm.w_u),
                ("ed.lstm.bias", &$($m)? c.lstm.bias),
            ]),
            CoreWeights::Lru(c) => v.extend([
                ("lru.nu", &$($m)? c.nu),
                ("lru.theta", &$($m)? c.theta),
                ("lru.b_re", &$($m)? c.b_re),
                ("lru.b_im", &$($m)? c.b_im),
                ("lru.bh_re", &$($m)? c.bh_re),
                ("lru.bh_im", &$($m)? c.bh_im),
                ("lru.c_re", &$($m)? c.c_re),
                ("lru.c_im", &$($m)? c.c_im),
                ("lru.bias_o", &$($m)? c.bias_o),
            ]),
            CoreWeights::S4d(c) => v.extend([
                ("s4d.a_log_re", &$($m)? c.a_log_re),
                ("s4d.a_im", &$($m)? c.a_im),
                ("s4d.b_re", &$($m)? c.b_re),
                ("s4d.b_im", &$($m)? c.b_im),
                ("s4d.c_re", &$($m)? c.c_re),
                ("s4d.c_im", &$($m)? c.c_im),
                ("s4d.d", &$($m)? c.d),
                ("s4d.log_dt", &$($m)? c.log_dt),
            ]),
            CoreWeights::S6(c) => v.extend([
                ("s6.dt.weight", &$($m)? c.dt.weight),
                ("s6.dt.bias", &$($m)? c.dt.bias),
                ("s6.a_log", &$($m)? c.a_log),
                ("s6.beta.weight", &$($m)? c.beta.weight),
                ("s6.beta.bias", &$($m)? c.beta.bias),
                ("s6.kappa.weight", &$($m)? c.kappa.weight),
                ("s6.kappa.bias", &$($m)? c.kappa.bias),
                ("s6.e", &$($m)? c.e),
                ("s6.f", &$($m)? c.f),
                ("s6.d", &$($m)? c.d),
            ]),
        }
        v.extend([("post.weight", &$($m)? w.post.weight), ("post.bias", &$($m)? w.post.bias)]);
        if let Some(f) = &$($m)? w.cond.film {
            v.extend([("film.weight", &$($m)? f.weight), ("film.bias", &$($m)? f.bias)]);
        }
        v.extend([
            ("glu.weight", &$($m)? w.cond.glu.weight),
            ("glu.bias", &$($m)? w.cond.glu.bias),
            ("out.weight", &$($m)? w.out.weight),
            ("out.bias", &$($m)? w.out.bias),
        ]);
        v
    }};
}

impl ModelWeights {
    pub fn zeros(config: &ModelConfig) -> Self {
        let arch = config.architecture;
        let core = match arch {
            Architecture::Lstm => CoreWeights::Lstm(LstmCell::zeros()),
            Architecture::Ed => CoreWeights::Ed(EdCell::zeros()),
            Architecture::Lru => CoreWeights::Lru(LruCell::zeros()),
            Architecture::S4d => CoreWeights::S4d(S4dCell::zeros()),
            Architecture::S6 => CoreWeights::S6(S6Cell::zeros()),
        };
        Self {
            proj: Dense::zeros(arch.proj_width(), arch.proj_inputs()),
            core,
            post: Dense::zeros(POST_WIDTH, arch.core_width()),
            cond: ConditioningBlock {
                film: (config.cond_dim > 0).then(|| Dense::zeros(FILM_WIDTH, config.cond_dim)),
                glu: Dense::zeros(FILM_WIDTH, POST_WIDTH),
            },
            out: Dense::zeros(1, POST_WIDTH),
        }
    }

    /// Random initialization. FiLM starts as the identity transform.
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let arch = config.architecture;
        let core = match arch {
            Architecture::Lstm => CoreWeights::Lstm(LstmCell::init(rng)),
            Architecture::Ed => CoreWeights::Ed(EdCell::init(rng)),
            Architecture::Lru => CoreWeights::Lru(LruCell::init(rng, LruInit::default())),
            Architecture::S4d => CoreWeights::S4d(S4dCell::init(rng, S4D_DT_RANGE)),
            Architecture::S6 => CoreWeights::S6(S6Cell::init(rng, S6_DT0)),
        };
        let proj = Dense::glorot(arch.proj_width(), arch.proj_inputs(), rng);
        let post = Dense::glorot(POST_WIDTH, arch.core_width(), rng);
        let film = (config.cond_dim > 0).then(|| {
            let mut f = Dense::glorot(FILM_WIDTH, config.cond_dim, rng);
            f.weight.scale(0.1);
            for k in 0..POST_WIDTH {
                f.bias.set(k, 0, 1.0);
            }
            f
        });
        Self {
            proj,
            core,
            post,
            cond: ConditioningBlock {
                film,
                glu: Dense::glorot(FILM_WIDTH, POST_WIDTH, rng),
            },
            out: Dense::glorot(1, POST_WIDTH, rng),
        }
    }

    /// Same structure, all entries zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, m) in z.tensors_mut() {
            m.fill(0.0);
        }
        z
    }

    pub fn architecture(&self) -> Architecture {
        match self.core {
            CoreWeights::Lstm(_) => Architecture::Lstm,
            CoreWeights::Ed(_) => Architecture::Ed,
            CoreWeights::Lru(_) => Architecture::Lru,
            CoreWeights::S4d(_) => Architecture::S4d,
            CoreWeights::S6(_) => Architecture::S6,
        }
    }

    pub fn cond_dim(&self) -> usize {
        self.cond.film.as_ref().map_or(0, |f| f.inputs())
    }

    /// Named arrays in a fixed order. Names are stable across versions.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        named_tensors!(self)
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        named_tensors!(self, mut)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    /// Flattened copy of every array in [`ModelWeights::tensors`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_scalars());
        for (_, m) in self.tensors() {
            v.extend_from_slice(m.as_slice());
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_scalars();
        if flat.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} scalars, got {}",
                flat.len()
            )));
        }
        let mut off = 0;
        for (_, m) in self.tensors_mut() {
            let len = m.len();
            m.as_mut_slice().copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(())
    }

    /// Verifies the arrays have exactly the shapes `config` implies.
    pub fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let want = ModelWeights::zeros(config);
        let have = self.tensors();
        let expect = want.tensors();
        if have.len() != expect.len() || self.architecture() != config.architecture {
            return Err(Error::Compatibility(format!(
                "weights are for {} with P = {}, config asks for {} with P = {}",
                self.architecture(),
                self.cond_dim(),
                config.architecture,
                config.cond_dim
            )));
        }
        for ((name, a), (_, b)) in have.iter().zip(&expect) {
            if !a.same_shape(b) {
                return Err(Error::Dimension(format!(
                    "weight '{name}' is {}x{}, expected {}x{}",
                    a.rows(),
                    a.cols(),
                    b.rows(),
                    b.cols()
                )));
            }
        }
        Ok(())
    }
}
