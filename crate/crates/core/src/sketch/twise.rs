//! t-wise independent hashing by a random degree t-1 polynomial over the
//! field of size 2^61 - 1.

use alloc::vec::Vec;

use super::field::{self, P};
use crate::prf;
use crate::sampling::InclusionProb;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwiseHash {
    coeffs: Vec<u64>,
}

/// Field element for a key. Keys at or above P are folded modulo P.
#[inline]
pub fn key_to_field(key: u128) -> u64 {
    field::reduce(key)
}

impl TwiseHash {
    pub fn new(t: usize, seed: u64) -> Self {
        let coeffs = (0..t.max(1) as u64).map(|i| field::reduce(prf::hash2(seed, i) as u128)).collect();
        TwiseHash { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<u64>) -> Self {
        TwiseHash { coeffs: coeffs.into_iter().map(|c| c % P).collect() }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn t(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, key: u128) -> u64 {
        let x = key_to_field(key);
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = field::add(field::mul(acc, x), c);
        }
        acc
    }

    /// h(key)/P < p.
    pub fn sample(&self, key: u128, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if !(p > 0.0) {
            return false;
        }
        (self.eval(key) as f64) < p * P as f64
    }

    /// Exact test for probability 1/m: h(key) * m < P.
    pub fn sample_reciprocal(&self, key: u128, prob: InclusionProb) -> bool {
        (self.eval(key) as u128) * (prob.denom() as u128) < P as u128
    }
}
