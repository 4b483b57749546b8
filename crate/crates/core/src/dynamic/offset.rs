//! Offsets to the nearest bicriteria center, rounded down to powers of a
//! base b close to 1.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::CenterSet;
use crate::params::ClusterParams;

/// b = 1 + eps^(2z) / (8 d^(1.5z) (log2 delta)^(4z)).
pub fn rounding_base(params: &ClusterParams) -> f64 {
    1.0 + rounding_beta(params)
}

pub(crate) fn rounding_beta(params: &ClusterParams) -> f64 {
    let z = params.z as f64;
    let lg = params.ell().max(1) as f64;
    libm::pow(params.eps, 2.0 * z) / (8.0 * libm::pow(params.d as f64, 1.5 * z) * libm::pow(lg, 4.0 * z))
}

/// Sign 0 is the reserved zero symbol; its exponent is ignored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OffsetCode {
    pub center: u32,
    pub signs: Vec<i8>,
    pub exponents: Vec<i64>,
}

/// ln b, kept apart from b because b - 1 can be far below f64 resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rounder {
    pub ln_base: f64,
}

impl Rounder {
    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::param("rounding base must exceed 1"));
        }
        Ok(Rounder { ln_base: libm::log1p(beta) })
    }

    pub fn from_base(base: f64) -> Result<Self> {
        Self::from_beta(base - 1.0)
    }

    #[inline]
    pub fn power(&self, e: i64) -> f64 {
        libm::exp(e as f64 * self.ln_base)
    }

    /// Largest e with b^e <= m, for m > 0.
    pub fn exponent(&self, m: f64) -> i64 {
        let mut e = libm::floor(libm::log(m) / self.ln_base) as i64;
        while self.power(e) > m {
            e -= 1;
        }
        while self.power(e + 1) <= m {
            e += 1;
        }
        e
    }

    pub fn encode(&self, x: &[f64], cprime: &CenterSet) -> Result<OffsetCode> {
        if cprime.is_empty() {
            return Err(Error::EmptyCenters);
        }
        let (ci, _) = cprime.nearest(x, 2);
        let c = &cprime.centers[ci];
        if c.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: c.len(), got: x.len() });
        }
        let mut signs = Vec::with_capacity(x.len());
        let mut exponents = Vec::with_capacity(x.len());
        for (a, b) in x.iter().zip(c) {
            let y = a - b;
            if y == 0.0 {
                signs.push(0);
                exponents.push(0);
            } else {
                signs.push(if y > 0.0 { 1 } else { -1 });
                exponents.push(self.exponent(y.abs()));
            }
        }
        Ok(OffsetCode { center: ci as u32, signs, exponents })
    }

    pub fn decode(&self, code: &OffsetCode, cprime: &CenterSet) -> Result<Vec<f64>> {
        let c = cprime.centers.get(code.center as usize).ok_or(Error::param("offset code names a missing center"))?;
        Ok(c.iter()
            .zip(code.signs.iter().zip(&code.exponents))
            .map(|(&ci, (&s, &e))| if s == 0 { ci } else { ci + s as f64 * self.power(e) })
            .collect())
    }
}

/// Encode x against its nearest center of cprime and decode it again.
pub fn offset_roundtrip(x: &[f64], cprime: &CenterSet, base: f64) -> Result<(OffsetCode, Vec<f64>)> {
    let r = Rounder::from_base(base)?;
    let code = r.encode(x, cprime)?;
    let back = r.decode(&code, cprime)?;
    Ok((code, back))
}

/// Mixed-radix packing of codes into recovery keys.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetLayout {
    pub d: usize,
    pub centers: u32,
    pub e_min: i64,
    pub e_max: i64,
}

impl OffsetLayout {
    /// Exponent range covering offset magnitudes in [min_mag, max_mag].
    pub fn new(d: usize, centers: usize, rounder: &Rounder, min_mag: f64, max_mag: f64) -> Result<Self> {
        let layout = OffsetLayout {
            d,
            centers: centers.max(1) as u32,
            e_min: rounder.exponent(min_mag) - 1,
            e_max: rounder.exponent(max_mag) + 1,
        };
        if layout.bits() > crate::sketch::sparse::KEY_BITS {
            return Err(Error::Overflow("offset code does not fit a recovery key"));
        }
        Ok(layout)
    }

    fn radix(&self) -> u128 {
        2 * (self.e_max - self.e_min + 1) as u128 + 1
    }

    /// Bits of one packed code.
    pub fn bits(&self) -> u32 {
        let lg = |v: u128| if v <= 1 { 0 } else { 128 - (v - 1).leading_zeros() };
        lg(self.centers as u128) + self.d as u32 * lg(self.radix())
    }

    pub fn pack(&self, code: &OffsetCode) -> Result<u128> {
        let radix = self.radix();
        let mut acc: u128 = 0;
        for i in (0..self.d).rev() {
            let sym = match code.signs[i] {
                0 => 0u128,
                s => {
                    let e = code.exponents[i];
                    if e < self.e_min || e > self.e_max {
                        return Err(Error::Overflow("offset exponent outside layout"));
                    }
                    1 + 2 * (e - self.e_min) as u128 + (s < 0) as u128
                }
            };
            acc = acc * radix + sym;
        }
        Ok(acc * self.centers as u128 + code.center as u128)
    }

    pub fn unpack(&self, key: u128) -> OffsetCode {
        let radix = self.radix();
        let center = (key % self.centers as u128) as u32;
        let mut rest = key / self.centers as u128;
        let mut signs = Vec::with_capacity(self.d);
        let mut exponents = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            let sym = rest % radix;
            rest /= radix;
            if sym == 0 {
                signs.push(0);
                exponents.push(0);
            } else {
                let v = sym - 1;
                signs.push(if v & 1 == 1 { -1 } else { 1 });
                exponents.push(self.e_min + (v >> 1) as i64);
            }
        }
        OffsetCode { center, signs, exponents }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cost_value, unit_points};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn center_and_zero_offsets_are_exact() {
        let c = CenterSet::new(vec![vec![3.0, 4.0], vec![10.0, 10.0]]);
        let (code, back) = offset_roundtrip(&[10.0, 10.0], &c, 1.1).unwrap();
        assert_eq!(code.signs, vec![0, 0]);
        assert_eq!(back, vec![10.0, 10.0]);
        let (code, back) = offset_roundtrip(&[3.0, 9.0], &c, 1.1).unwrap();
        assert_eq!(code.signs[0], 0);
        assert_eq!(back[0], 3.0);
        assert!(back[1] > 4.0 && back[1] <= 9.0);
    }

    #[test]
    fn ratio_within_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = Rounder::from_base(1.1).unwrap();
        for _ in 0..2000 {
            let c = CenterSet::new((0..3).map(|_| vec![rng.random_range(1.0..64.0), rng.random_range(1.0..64.0)]).collect());
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(1..=64) as f64).collect();
            let code = r.encode(&x, &c).unwrap();
            let back = r.decode(&code, &c).unwrap();
            let ctr = &c.centers[code.center as usize];
            for i in 0..2 {
                let true_off = (x[i] - ctr[i]).abs();
                let got = (back[i] - ctr[i]).abs();
                if true_off == 0.0 {
                    assert_eq!(got, 0.0);
                } else {
                    let ratio = got / true_off;
                    assert!(ratio <= 1.0 && ratio >= 1.0 / 1.1 - 1e-12, "{ratio}");
                    assert_eq!(back[i] > ctr[i], x[i] > ctr[i]);
                }
            }
        }
    }

    #[test]
    fn pack_unpack_identity() {
        let params = ClusterParams::new(2, 2, 0.25, 2, 64, 0).unwrap();
        let r = Rounder::from_beta(rounding_beta(&params)).unwrap();
        let layout = OffsetLayout::new(2, 5, &r, 1.0 / 256.0, 192.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = CenterSet::new((0..5).map(|_| vec![rng.random_range(1..=64) as f64, rng.random_range(1..=64) as f64]).collect());
        for _ in 0..500 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(1..=64) as f64).collect();
            let code = r.encode(&x, &c).unwrap();
            assert_eq!(layout.unpack(layout.pack(&code).unwrap()), code);
        }
        assert!(layout.bits() <= 120);
    }

    #[test]
    fn rounded_cost_stays_within_eps() {
        let params = ClusterParams::new(3, 2, 0.25, 2, 64, 0).unwrap();
        let r = Rounder::from_beta(rounding_beta(&params)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(1..=64) as f64, rng.random_range(1..=64) as f64]).collect();
        let cp = CenterSet::new((0..4).map(|_| vec![rng.random_range(1..=64) as f64, rng.random_range(1..=64) as f64]).collect());
        let rounded: Vec<Vec<f64>> = xs.iter().map(|x| r.decode(&r.encode(x, &cp).unwrap(), &cp).unwrap()).collect();
        for _ in 0..50 {
            let c = CenterSet::new((0..3).map(|_| vec![rng.random_range(1.0..64.0), rng.random_range(1.0..64.0)]).collect());
            let a = cost_value(&unit_points(&xs), &c, 2).unwrap();
            let b = cost_value(&unit_points(&rounded), &c, 2).unwrap();
            assert!((a - b).abs() <= 0.25 * a);
        }
    }
}
