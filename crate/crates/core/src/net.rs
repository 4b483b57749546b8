//! Candidate center nets and k-subset enumeration for the brute-force oracles.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{pow_z, sq_dist, WeightedPoint};

/// Largest number of center sets any oracle will enumerate.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Binomial coefficient, saturating.
pub fn binom(m: usize, j: usize) -> u128 {
    if j > m {
        return 0;
    }
    let j = j.min(m - j);
    let mut r: u128 = 1;
    for i in 0..j {
        r = match r.checked_mul((m - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    r
}

/// Candidate center locations, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateNet {
    pub candidates: Vec<Vec<f64>>,
}

impl CandidateNet {
    pub fn new(candidates: Vec<Vec<f64>>) -> Self {
        CandidateNet { candidates }
    }

    /// Grid with the given step over the bounding box of the points.
    pub fn over_box(points: &[WeightedPoint], step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::param("candidate grid step must be positive"));
        }
        if points.is_empty() {
            return Ok(CandidateNet { candidates: Vec::new() });
        }
        let d = points[0].coords.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in points {
            if p.coords.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.coords.len() });
            }
            for i in 0..d {
                lo[i] = lo[i].min(p.coords[i]);
                hi[i] = hi[i].max(p.coords[i]);
            }
        }
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let steps = libm::floor((hi[i] - lo[i]) / step + 1e-9) as usize;
                (0..=steps).map(|j| lo[i] + j as f64 * step).collect()
            })
            .collect();
        let total = axes.iter().try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128));
        match total {
            Some(t) if t <= ENUMERATION_BUDGET => {}
            _ => return Err(Error::BudgetExceeded { needed: total.unwrap_or(u128::MAX), budget: ENUMERATION_BUDGET }),
        }
        Ok(CandidateNet { candidates: cartesian(&axes) })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Number of center sets with 1..=k distinct candidates.
    pub fn subsets_upto(&self, k: usize) -> u128 {
        (1..=k.min(self.len())).fold(0u128, |acc, j| acc.saturating_add(binom(self.len(), j)))
    }

    pub fn check_budget(&self, k: usize) -> Result<()> {
        let needed = self.subsets_upto(k);
        if needed > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded { needed, budget: ENUMERATION_BUDGET });
        }
        Ok(())
    }
}

pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// dist_z from every candidate to every row, candidate-major.
pub struct DistanceTable {
    pub rows: usize,
    pub cands: usize,
    table: Vec<f64>,
}

impl DistanceTable {
    pub fn new(rows: &[&[f64]], net: &CandidateNet, z: u32) -> Self {
        let mut table = Vec::with_capacity(rows.len() * net.len());
        for c in &net.candidates {
            for r in rows {
                table.push(pow_z(sq_dist(r, c), z));
            }
        }
        DistanceTable { rows: rows.len(), cands: net.len(), table }
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.table[c * self.rows..(c + 1) * self.rows]
    }

    /// Visit every `size`-subset of candidates in lexicographic order with the
    /// per-row minimum distance over the chosen candidates.
    pub fn for_each_subset(&self, size: usize, mut visit: impl FnMut(&[usize], &[f64])) {
        if size == 0 || size > self.cands {
            return;
        }
        let mut mins: Vec<Vec<f64>> = vec![vec![f64::INFINITY; self.rows]; size + 1];
        let mut chosen = vec![0usize; size];
        self.recurse(0, 0, size, &mut chosen, &mut mins, &mut visit);
    }

    fn recurse(
        &self,
        depth: usize,
        start: usize,
        size: usize,
        chosen: &mut Vec<usize>,
        mins: &mut Vec<Vec<f64>>,
        visit: &mut impl FnMut(&[usize], &[f64]),
    ) {
        for c in start..=(self.cands - (size - depth)) {
            chosen[depth] = c;
            let col = self.column(c);
            let (lo, hi) = mins.split_at_mut(depth + 1);
            let prev = &lo[depth];
            let cur = &mut hi[0];
            for i in 0..self.rows {
                cur[i] = if col[i] < prev[i] { col[i] } else { prev[i] };
            }
            if depth + 1 == size {
                visit(chosen, &mins[depth + 1]);
            } else {
                self.recurse(depth + 1, c + 1, size, chosen, mins, visit);
            }
        }
    }
}
