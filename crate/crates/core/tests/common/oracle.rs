//! Extended-precision reference values for E_{α,β}(z).
//!
//! Direct summation of 200 Taylor terms in 170-bit (≈ 50 digit) floats.

use rug::ops::Pow;
use rug::Float;

const PREC: u32 = 170;
const TERMS: usize = 200;

pub struct MlfOracle {
    prec: u32,
    rgammas: Vec<Float>,
}

impl MlfOracle {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self::with_precision(alpha, beta, PREC, TERMS)
    }

    /// Enough bits and terms to survive the cancellation at large |z|.
    pub fn with_precision(alpha: f64, beta: f64, prec: u32, terms: usize) -> Self {
        let a = Float::with_val(prec, alpha);
        let b = Float::with_val(prec, beta);
        let rgammas = (0..terms)
            .map(|k| {
                let arg = Float::with_val(prec, &a * k as u32) + &b;
                if arg <= 0 && arg.is_integer() {
                    Float::with_val(prec, 0)
                } else {
                    Float::with_val(prec, arg.gamma()).recip()
                }
            })
            .collect();
        Self { prec, rgammas }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let z = Float::with_val(self.prec, z);
        let mut acc = Float::with_val(self.prec, 0);
        for c in self.rgammas.iter().rev() {
            acc *= &z;
            acc += c;
        }
        acc.to_f64()
    }

    /// 1.05 · max (1+|z|)|E(z)| over a uniform grid of `n` points on [z_min, 0].
    pub fn envelope_constant(&self, z_min: f64, n: usize) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..=n {
            let z = z_min * i as f64 / n as f64;
            m = m.max((1.0 + z.abs()) * self.eval(z).abs());
        }
        1.05 * m
    }
}

pub fn power(x: f64, p: f64) -> f64 {
    Float::with_val(PREC, x)
        .pow(Float::with_val(PREC, p))
        .to_f64()
}
