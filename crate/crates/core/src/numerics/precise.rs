use twofloat::{consts, TwoFloat};

/// Single-bin DFT evaluated in double-double arithmetic.
///
/// Used for spectral entries whose f64 value would be dominated by
/// rounding, such as the difference of two nearly equal magnitudes.
#[derive(Clone, Debug)]
pub struct PreciseDft {
    n: usize,
    cos: Vec<TwoFloat>,
    sin: Vec<TwoFloat>,
}

/// `(cos, sin)` of `2 pi m / n`, reduced to within an eighth turn first.
fn twiddle(m: usize, n: usize) -> (TwoFloat, TwoFloat) {
    let (t, n) = (4 * m as i64, n as i64);
    let q = (2 * t + n).div_euclid(2 * n);
    let theta = consts::FRAC_PI_2 * (t - q * n) as f64 / n as f64;
    let (mut c, mut s) = (TwoFloat::from(0.0), TwoFloat::from(0.0));
    let mut term = TwoFloat::from(1.0);
    for k in 0..30 {
        match k % 4 {
            0 => c += term,
            1 => s += term,
            2 => c -= term,
            _ => s -= term,
        }
        term = term * theta / (k + 1) as f64;
    }
    match q.rem_euclid(4) {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

impl PreciseDft {
    pub fn new(n: usize) -> Self {
        let (cos, sin) = (0..n).map(|m| twiddle(m, n)).unzip();
        Self { n, cos, sin }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `|X_k|` of `frame[i] * window[i]`; products are exact.
    pub fn magnitude(&self, frame: &[f64], window: &[f64], k: usize) -> TwoFloat {
        debug_assert!(frame.len() == self.n && window.len() == self.n);
        let (mut re, mut im) = (TwoFloat::from(0.0), TwoFloat::from(0.0));
        for (i, (x, w)) in frame.iter().zip(window).enumerate() {
            let s = TwoFloat::new_mul(*x, *w);
            let m = (k * i) % self.n;
            re += s * self.cos[m];
            im -= s * self.sin[m];
        }
        (re * re + im * im).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dft_frame_direct, hann_window};

    #[test]
    fn twiddles_are_unit_and_exact_at_quarters() {
        let d = PreciseDft::new(64);
        for m in 0..64 {
            let r = d.cos[m] * d.cos[m] + d.sin[m] * d.sin[m] - 1.0;
            assert!(f64::from(r).abs() < 1e-30);
        }
        for (m, c, s) in [
            (0, 1.0, 0.0),
            (16, 0.0, 1.0),
            (32, -1.0, 0.0),
            (48, 0.0, -1.0),
        ] {
            assert_eq!((d.cos[m], d.sin[m]), (TwoFloat::from(c), TwoFloat::from(s)));
        }
    }

    #[test]
    fn agrees_with_the_f64_dft() {
        let n = 256;
        let x: Vec<f64> = (0..n)
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 50.0)
            .collect();
        let w = hann_window(n);
        let windowed: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let direct = dft_frame_direct(&windowed);
        let d = PreciseDft::new(n);
        for (k, m) in direct.iter().enumerate() {
            let p = f64::from(d.magnitude(&x, &w, k));
            assert!((p - m).abs() <= 1e-12 * (1.0 + m));
        }
    }
}
