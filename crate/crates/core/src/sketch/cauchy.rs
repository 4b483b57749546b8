//! L1 sketch with on-demand Cauchy variates.
//!
//! Accumulators are fixed-point integers: each variate is quantized to
//! FRACTION_BITS binary places and updates carry integer deltas, so the
//! state is an exact linear function of the update multiset. Wrapping
//! arithmetic keeps that true even if a partial sum overflows.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::prf;

pub const FRACTION_BITS: u32 = 16;
/// |variate| is capped at 2^36 before quantization.
pub const VARIATE_CAP: f64 = 68_719_476_736.0;

/// Nolan's representation of a standard 1-stable variate from a uniform
/// angle theta in (-pi/2, pi/2): for p = 1 it reduces to tan(theta).
#[inline]
pub fn cauchy_from_uniform(u: f64) -> f64 {
    let theta = core::f64::consts::PI * (u - 0.5);
    libm::tan(theta)
}

#[inline]
pub fn variate(seed: u64, rep: u64, key: u64) -> f64 {
    cauchy_from_uniform(prf::unit_open(prf::hash3(seed, rep, key)))
}

#[inline]
fn quantized(seed: u64, rep: u64, key: u64) -> i128 {
    let v = variate(seed, rep, key).clamp(-VARIATE_CAP, VARIATE_CAP);
    libm::round(v * (1u64 << FRACTION_BITS) as f64) as i128
}

/// ceil(c / eps^2 (ln(1/(eps delta)) + ln ln m)).
pub fn repetitions(eps: f64, delta: f64, m: u64, c: f64) -> usize {
    let lnln = libm::log(libm::log((m.max(3)) as f64)).max(0.0);
    libm::ceil(c / (eps * eps) * (libm::log(1.0 / (eps * delta)) + lnln)).max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauchySketch {
    seed: u64,
    acc: Vec<i128>,
}

impl CauchySketch {
    pub fn new(ell: usize, seed: u64) -> Self {
        CauchySketch { seed, acc: alloc::vec![0; ell.max(1)] }
    }

    pub fn from_raw(seed: u64, acc: Vec<i128>) -> Self {
        CauchySketch { seed, acc }
    }

    pub fn ell(&self) -> usize {
        self.acc.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn raw(&self) -> &[i128] {
        &self.acc
    }

    /// Z_i += delta * C_i(key).
    pub fn update(&mut self, key: u64, delta: i128) {
        if delta == 0 {
            return;
        }
        for (i, z) in self.acc.iter_mut().enumerate() {
            *z = z.wrapping_add(delta.wrapping_mul(quantized(self.seed, i as u64, key)));
        }
    }

    /// Contribution vector of a single key, for callers that score many
    /// candidate measures against the same sketch.
    pub fn column(&self, key: u64) -> Vec<i128> {
        (0..self.acc.len()).map(|i| quantized(self.seed, i as u64, key)).collect()
    }

    /// Median of |Z_i|; the median of |Cauchy| is 1.
    pub fn estimate(&self) -> f64 {
        median_abs(&self.acc)
    }

    fn check(&self, other: &CauchySketch) -> Result<()> {
        if self.seed != other.seed || self.acc.len() != other.acc.len() {
            return Err(Error::SketchMismatch("cauchy sketches differ in seed or length"));
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &CauchySketch) -> Result<()> {
        self.check(other)?;
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            *a = a.wrapping_add(*b);
        }
        Ok(())
    }

    pub fn subtract(&mut self, other: &CauchySketch) -> Result<()> {
        self.check(other)?;
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            *a = a.wrapping_sub(*b);
        }
        Ok(())
    }
}

/// Median of absolute values of fixed-point accumulators, descaled.
pub fn median_abs(acc: &[i128]) -> f64 {
    if acc.is_empty() {
        return 0.0;
    }
    let mut v: Vec<f64> = acc.iter().map(|z| z.unsigned_abs() as f64).collect();
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    med / (1u64 << FRACTION_BITS) as f64
}
