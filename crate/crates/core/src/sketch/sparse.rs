//! s-sparse recovery by checksum-verified peeling.
//!
//! Each of `rows` rows hashes a key to one of `width` buckets. A bucket keeps
//! the exact count, an auxiliary integer payload, the count-weighted key
//! (two 60-bit limbs, mod P) and a checksum sum(delta * h(key)) mod P. A
//! bucket holding a single key is recognised by dividing out the count and
//! re-checking the checksum.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::field;
use crate::error::{Error, Result};
use crate::prf;

pub const KEY_BITS: u32 = 120;
const LIMB: u32 = 60;
const LIMB_MASK: u128 = (1 << LIMB) - 1;
pub const DEFAULT_ROWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Bucket {
    pub count: i64,
    pub payload: i128,
    pub key_lo: u64,
    pub key_hi: u64,
    pub check: u64,
}

impl Bucket {
    fn is_zero(&self) -> bool {
        *self == Bucket::default()
    }
}

/// Recovered coordinate: net count and the summed payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recovered {
    pub count: i64,
    pub payload: i128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseRecoverySketch {
    s: usize,
    rows: usize,
    width: usize,
    seed: u64,
    buckets: Vec<Bucket>,
}

impl SparseRecoverySketch {
    pub fn new(s: usize, seed: u64) -> Self {
        Self::with_rows(s, DEFAULT_ROWS, seed)
    }

    pub fn with_rows(s: usize, rows: usize, seed: u64) -> Self {
        let s = s.max(1);
        let rows = rows.max(1);
        let width = 2 * s;
        SparseRecoverySketch { s, rows, width, seed, buckets: vec![Bucket::default(); rows * width] }
    }

    pub fn from_raw(s: usize, rows: usize, seed: u64, buckets: Vec<Bucket>) -> Result<Self> {
        if buckets.len() != rows * 2 * s {
            return Err(Error::SketchMismatch("bucket count does not match dimensions"));
        }
        Ok(SparseRecoverySketch { s, rows, width: 2 * s, seed, buckets })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    /// Words of state: five per bucket.
    pub fn words(&self) -> u64 {
        5 * self.buckets.len() as u64
    }

    fn slot(&self, row: usize, key: u128) -> usize {
        row * self.width + (prf::hash3(self.seed, row as u64, prf::hash_u128(self.seed, key)) % self.width as u64) as usize
    }

    fn fingerprint(&self, key: u128) -> u64 {
        field::reduce(prf::hash_u128(self.seed ^ 0xC0FF_EE00_D15E_A5E5, key) as u128)
    }

    pub fn update(&mut self, key: u128, delta: i64, payload: i128) -> Result<()> {
        if key >> KEY_BITS != 0 {
            return Err(Error::Overflow("recovery key exceeds 120 bits"));
        }
        let c = field::from_i64(delta);
        let lo = field::mul(c, (key & LIMB_MASK) as u64);
        let hi = field::mul(c, (key >> LIMB) as u64);
        let chk = field::mul(c, self.fingerprint(key));
        for r in 0..self.rows {
            let i = self.slot(r, key);
            let b = &mut self.buckets[i];
            b.count = b.count.wrapping_add(delta);
            b.payload = b.payload.wrapping_add(payload);
            b.key_lo = field::add(b.key_lo, lo);
            b.key_hi = field::add(b.key_hi, hi);
            b.check = field::add(b.check, chk);
        }
        Ok(())
    }

    fn pure_key(&self, idx: usize) -> Option<u128> {
        let b = &self.buckets[idx];
        if b.count == 0 {
            return None;
        }
        let c = field::from_i64(b.count);
        if c == 0 {
            return None;
        }
        let ci = field::inv(c);
        let lo = field::mul(b.key_lo, ci) as u128;
        let hi = field::mul(b.key_hi, ci) as u128;
        if lo > LIMB_MASK || hi > LIMB_MASK {
            return None;
        }
        let key = (hi << LIMB) | lo;
        if self.slot(idx / self.width, key) != idx {
            return None;
        }
        if field::mul(c, self.fingerprint(key)) != b.check {
            return None;
        }
        Some(key)
    }

    /// Peel singleton buckets until nothing changes. Fails with an overflow
    /// report when residue remains or more than s keys come out.
    pub fn decode(&self) -> Result<BTreeMap<u128, Recovered>> {
        let mut work = self.clone();
        let mut out: BTreeMap<u128, Recovered> = BTreeMap::new();
        let mut stack: Vec<usize> = (0..work.buckets.len()).collect();
        while let Some(idx) = stack.pop() {
            let Some(key) = work.pure_key(idx) else { continue };
            let b = work.buckets[idx];
            let (count, payload) = (b.count, b.payload);
            work.update(key, count.wrapping_neg(), payload.wrapping_neg())?;
            let e = out.entry(key).or_insert(Recovered { count: 0, payload: 0 });
            e.count = e.count.wrapping_add(count);
            e.payload = e.payload.wrapping_add(payload);
            for r in 0..work.rows {
                stack.push(work.slot(r, key));
            }
            if out.len() > self.s {
                return Err(Error::RecoveryOverflow { recovered: out.len(), budget: self.s });
            }
        }
        if work.buckets.iter().any(|b| !b.is_zero()) {
            return Err(Error::RecoveryOverflow { recovered: out.len(), budget: self.s });
        }
        out.retain(|_, v| v.count != 0 || v.payload != 0);
        Ok(out)
    }

    pub fn merge(&mut self, other: &SparseRecoverySketch) -> Result<()> {
        if (self.s, self.rows, self.seed) != (other.s, other.rows, other.seed) {
            return Err(Error::SketchMismatch("sparse sketches differ in shape or seed"));
        }
        for (a, b) in self.buckets.iter_mut().zip(&other.buckets) {
            a.count = a.count.wrapping_add(b.count);
            a.payload = a.payload.wrapping_add(b.payload);
            a.key_lo = field::add(a.key_lo, b.key_lo);
            a.key_hi = field::add(a.key_hi, b.key_hi);
            a.check = field::add(a.check, b.check);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cancellation_example() {
        let mut s = SparseRecoverySketch::new(4, 1);
        s.update(10, 3, 0).unwrap();
        s.update(20, 2, 0).unwrap();
        s.update(10, -3, 0).unwrap();
        let d = s.decode().unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&20].count, 2);
    }

    #[test]
    fn empty_decodes_empty() {
        assert!(SparseRecoverySketch::new(8, 2).decode().unwrap().is_empty());
    }

    #[test]
    fn overflow_is_reported() {
        let mut s = SparseRecoverySketch::new(4, 3);
        for k in 0..50u128 {
            s.update(k * 1_000_003, 1, 0).unwrap();
        }
        assert!(matches!(s.decode(), Err(Error::RecoveryOverflow { .. })));
    }

    #[test]
    fn large_keys_and_payloads() {
        let mut s = SparseRecoverySketch::new(4, 5);
        let k = (1u128 << 119) + 12345;
        s.update(k, -2, -14).unwrap();
        let d = s.decode().unwrap();
        assert_eq!(d[&k], Recovered { count: -2, payload: -14 });
        assert!(s.update(1u128 << 120, 1, 0).is_err());
    }

    #[test]
    fn order_insensitive_and_mergeable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ups: Vec<(u128, i64)> = (0..300).map(|_| (rng.random_range(0..40u128), rng.random_range(-3..4i64))).collect();
        let mut a = SparseRecoverySketch::new(64, 9);
        for &(k, d) in &ups {
            a.update(k, d, d as i128).unwrap();
        }
        let mut shuffled = ups.clone();
        shuffled.shuffle(&mut rng);
        let (mut b1, mut b2) = (SparseRecoverySketch::new(64, 9), SparseRecoverySketch::new(64, 9));
        for (i, &(k, d)) in shuffled.iter().enumerate() {
            if i % 2 == 0 { b1.update(k, d, d as i128).unwrap() } else { b2.update(k, d, d as i128).unwrap() }
        }
        b1.merge(&b2).unwrap();
        assert_eq!(a, b1);
        assert_eq!(a.decode().unwrap(), b1.decode().unwrap());
    }

    #[test]
    fn random_sparse_vectors_recover() {
        let s = 64;
        let mut ok = 0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut truth: BTreeMap<u128, i64> = BTreeMap::new();
            while truth.len() < s / 2 {
                let v = rng.random_range(1..50i64) * if rng.random_bool(0.5) { 1 } else { -1 };
                truth.insert(rng.random::<u128>() >> 8, v);
            }
            let mut ups: Vec<(u128, i64)> = Vec::new();
            for (&k, &v) in &truth {
                ups.push((k, v));
            }
            while ups.len() < 10_000 {
                let k = rng.random::<u128>() >> 8;
                let v = rng.random_range(1..20i64);
                ups.push((k, v));
                ups.push((k, -v));
            }
            ups.shuffle(&mut rng);
            let mut sk = SparseRecoverySketch::new(s, seed);
            for &(k, v) in &ups {
                sk.update(k, v, 0).unwrap();
            }
            if let Ok(d) = sk.decode() {
                let got: BTreeMap<u128, i64> = d.iter().map(|(&k, r)| (k, r.count)).collect();
                if got == truth {
                    ok += 1;
                }
            }
        }
        assert!(ok >= 198, "{ok}/200");
    }
}
