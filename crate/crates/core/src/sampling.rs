//! Inverse-CDF sampling from dense discrete distributions.

use rand::Rng;

/// Name of the PRNG used for every seeded stream in the crate.
pub const PRNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Discrete {
    /// `weights` must be non-negative with a positive sum; they need not be normalized.
    pub fn new(weights: &[f64]) -> Option<Self> {
        let mut acc = 0.0;
        let mut last_positive = None;
        let mut cdf = Vec::with_capacity(weights.len());
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return None;
            }
            if w > 0.0 {
                last_positive = Some(i);
            }
            acc += w;
            cdf.push(acc);
        }
        Some(Discrete {
            cdf,
            last_positive: last_positive?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty");
        let u = rng.gen::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.last_positive)
    }
}
