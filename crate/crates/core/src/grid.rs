//! Randomly shifted quadtree embeddings G_s (EMD) and W_s (Wasserstein-z).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::{powi, ratio_to_f64, Point};
use crate::prf;

pub type Mass = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    Emd,
    Wass { z: u32 },
}

/// Signed measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MassVector {
    pub support: Vec<(Vec<f64>, Mass)>,
}

impl MassVector {
    pub fn new(support: Vec<(Vec<f64>, Mass)>) -> Self {
        MassVector { support }
    }

    pub fn point_mass(p: Vec<f64>) -> Self {
        MassVector { support: vec![(p, Mass::from_integer(1))] }
    }

    /// Probability measure with equal mass on each listed point.
    pub fn uniform(points: &[Vec<f64>]) -> Self {
        let n = points.len() as i128;
        MassVector { support: points.iter().map(|p| (p.clone(), Mass::new(1, n.max(1)))).collect() }
    }

    pub fn from_lattice(points: &[Point]) -> Self {
        Self::uniform(&points.iter().map(|p| p.to_f64()).collect::<Vec<_>>())
    }

    pub fn total(&self) -> Mass {
        self.support.iter().fold(Mass::zero(), |a, (_, m)| a + m)
    }

    pub fn scaled(&self, c: Mass) -> Self {
        MassVector { support: self.support.iter().map(|(p, m)| (p.clone(), m * c)).collect() }
    }

    /// self - other, as one atom list.
    pub fn minus(&self, other: &MassVector) -> Self {
        let mut support = self.support.clone();
        support.extend(other.support.iter().map(|(p, m)| (p.clone(), -m)));
        MassVector { support }
    }

    pub fn plus(&self, other: &MassVector) -> Self {
        let mut support = self.support.clone();
        support.extend(other.support.iter().cloned());
        MassVector { support }
    }

    /// Merge atoms at identical locations and drop zero masses.
    pub fn canonical(&self) -> Self {
        let mut acc: BTreeMap<Vec<u64>, (Vec<f64>, Mass)> = BTreeMap::new();
        for (p, m) in &self.support {
            let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
            acc.entry(key).or_insert_with(|| (p.clone(), Mass::zero())).1 += m;
        }
        MassVector { support: acc.into_values().filter(|(_, m)| !m.is_zero()).collect() }
    }
}

/// Cell masses per (level, cell), before level scaling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embedded {
    pub cells: BTreeMap<(u32, Vec<i64>), Mass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedGridEmbedding {
    pub d: usize,
    pub delta: u64,
    pub ell: u32,
    pub shift: Vec<u64>,
    pub mode: EmbeddingMode,
}

impl ShiftedGridEmbedding {
    pub fn new(d: usize, delta: u64, shift: Vec<u64>, mode: EmbeddingMode) -> Result<Self> {
        if !delta.is_power_of_two() || delta < 2 {
            return Err(Error::param("delta must be a power of two"));
        }
        if shift.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: shift.len() });
        }
        if shift.iter().any(|&s| s > delta) {
            return Err(Error::param("shift entries must lie in [0, delta]"));
        }
        if let EmbeddingMode::Wass { z } = mode {
            if z == 0 {
                return Err(Error::param("z must be positive"));
            }
        }
        Ok(ShiftedGridEmbedding { d, delta, ell: delta.trailing_zeros(), shift, mode })
    }

    /// Shift drawn uniformly from [1, delta]^d.
    pub fn random(d: usize, delta: u64, mode: EmbeddingMode, seed: u64) -> Result<Self> {
        let shift = (0..d as u64).map(|i| prf::hash2(seed, i) % delta + 1).collect();
        Self::new(d, delta, shift, mode)
    }

    /// Coordinate in the shifted frame u = x - 1 + s.
    #[inline]
    pub fn frame(&self, axis: usize, x: f64) -> f64 {
        x - 1.0 + self.shift[axis] as f64
    }

    pub fn cell(&self, x: &[f64], level: u32) -> Vec<i64> {
        let side = (1u64 << level) as f64;
        x.iter().enumerate().map(|(i, &c)| libm::floor(self.frame(i, c) / side) as i64).collect()
    }

    /// Per-level scale: 2^t, or (2^t sqrt(d))^z.
    pub fn level_scale(&self, level: u32) -> f64 {
        match self.mode {
            EmbeddingMode::Emd => (1u64 << level) as f64,
            EmbeddingMode::Wass { z } => powi((1u64 << level) as f64 * libm::sqrt(self.d as f64), z),
        }
    }

    /// Integer part of the level scale; level_scale = level_weight * common_factor.
    pub fn level_weight(&self, level: u32) -> i128 {
        match self.mode {
            EmbeddingMode::Emd => 1i128 << level,
            EmbeddingMode::Wass { z } => 1i128 << (level * z),
        }
    }

    pub fn common_factor(&self) -> f64 {
        match self.mode {
            EmbeddingMode::Emd => 1.0,
            EmbeddingMode::Wass { z } => libm::pow(self.d as f64, z as f64 / 2.0),
        }
    }

    /// Sketch coordinate of a cell.
    pub fn cell_key(&self, level: u32, cell: &[i64]) -> u64 {
        let mut words: Vec<u64> = Vec::with_capacity(cell.len() + 1);
        words.push(level as u64);
        words.extend(cell.iter().map(|&c| c as u64));
        prf::hash_words(0x6b7a_6772_6964, &words)
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: p.len() });
        }
        let lo = 1.0 - self.delta as f64;
        let hi = 2.0 * self.delta as f64;
        for &c in p {
            if !(c >= lo && c <= hi) {
                return Err(Error::OutOfRange { value: c as i64, delta: self.delta });
            }
        }
        Ok(())
    }

    /// Exact linear embedding: every atom adds its mass to one cell per level.
    pub fn embed(&self, mu: &MassVector) -> Result<Embedded> {
        let mut cells: BTreeMap<(u32, Vec<i64>), Mass> = BTreeMap::new();
        for (p, m) in &mu.support {
            self.check_point(p)?;
            for t in 0..=self.ell {
                *cells.entry((t, self.cell(p, t))).or_insert_with(Mass::zero) += m;
            }
        }
        cells.retain(|_, m| !m.is_zero());
        Ok(Embedded { cells })
    }

    /// Unscaled L1 mass per level.
    pub fn level_norms(&self, e: &Embedded) -> Vec<f64> {
        let mut g = vec![0.0; self.ell as usize + 1];
        for ((t, _), m) in &e.cells {
            g[*t as usize] += ratio_to_f64(&m.abs());
        }
        g
    }

    pub fn l1_norm(&self, e: &Embedded) -> f64 {
        self.level_norms(e).iter().enumerate().map(|(t, g)| g * self.level_scale(t as u32)).sum()
    }

    pub fn norm_of_difference(&self, mu: &MassVector, nu: &MassVector) -> Result<f64> {
        Ok(self.l1_norm(&self.embed(&mu.minus(nu))?))
    }

    /// Cost of the nested greedy matching read off G_s: mass first paired
    /// inside a level-t cell travels at most sqrt(d)(2^t - 1); whatever is
    /// left at the top travels at most sqrt(d)(delta - 1). Lattice measures
    /// of equal total mass only.
    pub fn greedy_matching_bound(&self, mu: &MassVector, nu: &MassVector) -> Result<f64> {
        let g = self.level_norms(&self.embed(&mu.minus(nu))?);
        let sd = libm::sqrt(self.d as f64);
        let mut total = 0.0;
        for t in 1..g.len() {
            total += sd * ((1u64 << t) as f64 - 1.0) * 0.5 * (g[t - 1] - g[t]);
        }
        total += sd * (self.delta as f64 - 1.0) * 0.5 * g[self.ell as usize];
        Ok(total)
    }
}

/// Mean over random shifts of the largest W_s (z=2) distortion among n/2
/// random adjacent pairs on the line [1, delta].
pub fn adjacent_pair_distortion(n: usize, delta: u64, trials: usize, seed: u64) -> Result<f64> {
    let pairs = (n / 2).max(1);
    let mut sum = 0.0;
    for trial in 0..trials {
        let ts = prf::derive(seed, trial as u64);
        let emb = ShiftedGridEmbedding::random(1, delta, EmbeddingMode::Wass { z: 2 }, ts)?;
        let mut worst: f64 = 0.0;
        for i in 0..pairs {
            let h = prf::hash2(ts ^ 0x7061_6972, i as u64);
            let a = 2 + (h >> 1) % (delta - 2);
            let b = if h & 1 == 0 { a - 1 } else { a + 1 };
            let e = emb.norm_of_difference(&MassVector::point_mass(vec![a as f64]), &MassVector::point_mass(vec![b as f64]))?;
            worst = worst.max(e);
        }
        sum += worst;
    }
    Ok(sum / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::emd_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emd1(shift: u64) -> ShiftedGridEmbedding {
        ShiftedGridEmbedding::new(1, 2, vec![shift], EmbeddingMode::Emd).unwrap()
    }

    /// Direct enumeration: count levels at which the two points fall in
    /// different cells, weighting each by 2 * 2^t.
    fn separated_norm(a: i64, b: i64, s: i64, ell: u32) -> f64 {
        (0..=ell).filter(|&t| (a - 1 + s).div_euclid(1 << t) != (b - 1 + s).div_euclid(1 << t)).map(|t| 2.0 * (1u64 << t) as f64).sum()
    }

    #[test]
    fn two_point_examples() {
        let mu = MassVector::point_mass(vec![1.0]);
        let nu = MassVector::point_mass(vec![2.0]);
        assert_eq!(emd1(0).norm_of_difference(&mu, &nu).unwrap(), 2.0);
        assert_eq!(separated_norm(1, 2, 0, 1), 2.0);
        assert_eq!(emd1(1).norm_of_difference(&mu, &nu).unwrap(), 6.0);
        assert_eq!(separated_norm(1, 2, 1, 1), 6.0);
    }

    #[test]
    fn equal_measures_embed_to_zero() {
        let emb = ShiftedGridEmbedding::random(2, 16, EmbeddingMode::Wass { z: 2 }, 4).unwrap();
        let mu = MassVector::uniform(&[vec![1.0, 2.0], vec![5.0, 9.0]]);
        assert!(emb.embed(&mu.minus(&mu)).unwrap().cells.is_empty());
    }

    #[test]
    fn out_of_range_rejected() {
        let emb = ShiftedGridEmbedding::random(1, 16, EmbeddingMode::Emd, 1).unwrap();
        assert!(emb.embed(&MassVector::point_mass(vec![100.0])).is_err());
        assert!(emb.embed(&MassVector::point_mass(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn embedding_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let emb = ShiftedGridEmbedding::random(2, 32, EmbeddingMode::Emd, 9).unwrap();
        for _ in 0..20 {
            let pts = |rng: &mut ChaCha8Rng| -> MassVector {
                MassVector::new(
                    (0..5)
                        .map(|_| (vec![rng.random_range(1..=32) as f64, rng.random_range(1..=32) as f64], Mass::new(rng.random_range(-5..6), 7)))
                        .collect(),
                )
            };
            let (mu, nu) = (pts(&mut rng), pts(&mut rng));
            let direct = emb.embed(&mu.minus(&nu)).unwrap();
            let (a, b) = (emb.embed(&mu).unwrap(), emb.embed(&nu).unwrap());
            let mut diff = a.cells.clone();
            for (k, m) in b.cells {
                *diff.entry(k).or_insert_with(Mass::zero) -= m;
            }
            diff.retain(|_, m| !m.is_zero());
            assert_eq!(direct.cells, diff);
        }
    }

    #[test]
    fn contraction_and_greedy_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let d = 1 + trial % 3;
            let delta = 1u64 << rng.random_range(2..7);
            let gen = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
                (0..n).map(|_| (0..d).map(|_| rng.random_range(1..=delta) as f64).collect()).collect()
            };
            let (na, nb) = (rng.random_range(1..8), rng.random_range(1..8));
            let mu = MassVector::uniform(&gen(&mut rng, na));
            let nu = MassVector::uniform(&gen(&mut rng, nb));
            let emb = ShiftedGridEmbedding::random(d, delta, EmbeddingMode::Emd, trial as u64).unwrap();
            let emd = emd_exact(&mu, &nu, 1, delta, d).unwrap();
            let g = emb.norm_of_difference(&mu, &nu).unwrap();
            let greedy = emb.greedy_matching_bound(&mu, &nu).unwrap();
            assert!(emd <= greedy * (1.0 + 1e-9) + 1e-9, "emd {emd} greedy {greedy}");
            assert!(greedy <= libm::sqrt(d as f64) / 2.0 * g * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn adjacent_pairs_distortion_grows() {
        let small = adjacent_pair_distortion(64, 1 << 30, 30, 1).unwrap();
        let large = adjacent_pair_distortion(1024, 1 << 30, 30, 1).unwrap();
        assert!(small > 0.0);
        assert!(large > 4.0 * small);
    }
}
