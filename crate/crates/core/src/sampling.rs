//! Inclusion probabilities quantized to reciprocals of integers.
//!
//! A probability p is replaced by 1/m with m = floor(1/p), so p_eff >= p and
//! the reweighting factor 1/p_eff = m is an integer. Weights then stay exact
//! rationals whose denominators never grow.

use crate::prf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InclusionProb {
    denom: u64,
}

impl InclusionProb {
    pub const ONE: InclusionProb = InclusionProb { denom: 1 };

    /// Smallest-denominator reciprocal not below p. Nonpositive p maps to
    /// the smallest representable probability.
    pub fn at_least(p: f64) -> Self {
        if !(p < 1.0) {
            return InclusionProb::ONE;
        }
        if !(p > 0.0) {
            return InclusionProb { denom: u64::MAX };
        }
        let inv = libm::floor(1.0 / p);
        let denom = if inv >= u64::MAX as f64 { u64::MAX } else { (inv as u64).max(1) };
        InclusionProb { denom }
    }

    pub fn from_denom(denom: u64) -> Self {
        InclusionProb { denom: denom.max(1) }
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn prob(&self) -> f64 {
        1.0 / self.denom as f64
    }

    /// Accept iff a uniform 64-bit word falls below 2^64 / m.
    pub fn accepts(&self, u: u64) -> bool {
        (u as u128) * (self.denom as u128) < (1u128 << 64)
    }

    /// Bernoulli draw keyed by (seed, index).
    pub fn draw(&self, seed: u64, index: u64) -> bool {
        self.denom == 1 || self.accepts(prf::hash2(seed, index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_never_lowers_p() {
        for &p in &[1.0, 0.9, 0.5, 0.33, 0.01, 1e-9, 2.0] {
            let q = InclusionProb::at_least(p);
            assert!(q.prob() >= p.min(1.0));
            assert!(q.prob() < 2.0 * p.min(1.0) + 1e-12);
        }
        assert_eq!(InclusionProb::at_least(0.5).denom(), 2);
        assert_eq!(InclusionProb::at_least(0.34).denom(), 2);
    }

    #[test]
    fn draw_rate_matches() {
        let q = InclusionProb::from_denom(4);
        let hits = (0..100_000u64).filter(|&i| q.draw(5, i)).count();
        assert!((hits as f64 / 100_000.0 - 0.25).abs() < 0.01);
        assert!((0..1000u64).all(|i| InclusionProb::ONE.draw(5, i)));
    }
}
