//! Deterministic sample points and residual bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const DEFAULT_SAMPLE_COUNT: usize = 50;

/// The box center followed by `count` points drawn uniformly from the box.
pub fn box_samples(domain: &[(f64, f64)], seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count + 1);
    out.push(domain.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());
    for _ in 0..count {
        out.push(domain.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect());
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Running maximum of absolute residuals with the first point attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub witness: Option<Vec<f64>>,
}

impl Default for Residual {
    fn default() -> Self {
        Residual {
            max: 0.0,
            witness: None,
        }
    }
}

impl Residual {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, value: f64, point: &[f64]) {
        let v = value.abs();
        if self.max.is_nan() {
            return;
        }
        // NaN wins so it cannot hide behind a finite maximum
        if self.witness.is_none() || v.is_nan() || v > self.max {
            self.max = v;
            self.witness = Some(point.to_vec());
        }
    }

    pub fn observe_all(&mut self, values: impl IntoIterator<Item = f64>, point: &[f64]) {
        for v in values {
            self.observe(v, point);
        }
    }

    pub fn merge(&mut self, other: Residual) {
        if let Some(w) = other.witness {
            self.observe(other.max, &w);
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max <= tol
    }
}
