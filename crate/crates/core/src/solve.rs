//! Exact (enumerative) and approximate (seeding plus local search) solvers.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{cost, pow_z, sq_dist, CenterSet, WeightedPoint};
use crate::net::{binom, CandidateNet, DistanceTable, ENUMERATION_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub centers: CenterSet,
    pub cost: f64,
    pub assignment: Vec<usize>,
}

/// Best k-subset of the candidate grid over the bounding box of the points.
pub fn solve_exact(points: &[WeightedPoint], k: usize, z: u32, step: f64) -> Result<Solution> {
    let net = CandidateNet::over_box(points, step)?;
    solve_exact_on(points, k, z, &net)
}

pub fn solve_exact_on(points: &[WeightedPoint], k: usize, z: u32, net: &CandidateNet) -> Result<Solution> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if points.is_empty() || net.is_empty() {
        return Ok(Solution { centers: CenterSet::default(), cost: 0.0, assignment: Vec::new() });
    }
    let size = k.min(net.len());
    let needed = binom(net.len(), size);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: ENUMERATION_BUDGET });
    }
    let rows: Vec<&[f64]> = points.iter().map(|p| p.coords.as_slice()).collect();
    let w: Vec<f64> = points.iter().map(|p| p.w()).collect();
    let table = DistanceTable::new(&rows, net, z);
    let mut best = f64::INFINITY;
    let mut best_set: Vec<usize> = Vec::new();
    table.for_each_subset(size, |chosen, mins| {
        let mut c = 0.0;
        for i in 0..mins.len() {
            c += w[i] * mins[i];
        }
        // strict comparison with a relative guard keeps the lexicographically first minimizer
        if best_set.is_empty() || c < best - 1e-12 * best.abs() {
            best = c;
            best_set = chosen.to_vec();
        }
    });
    let centers = CenterSet::new(best_set.iter().map(|&j| net.candidates[j].clone()).collect());
    let r = cost(points, &centers, z)?;
    Ok(Solution { centers, cost: r.cost, assignment: r.assignment })
}

fn distinct_points(points: &[WeightedPoint]) -> Vec<Vec<f64>> {
    let mut seen: BTreeMap<Vec<u64>, ()> = BTreeMap::new();
    let mut out = Vec::new();
    for p in points {
        let key: Vec<u64> = p.coords.iter().map(|c| c.to_bits()).collect();
        if seen.insert(key, ()).is_none() {
            out.push(p.coords.clone());
        }
    }
    out
}

struct Assign {
    a1: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn assign(points: &[WeightedPoint], centers: &[Vec<f64>], z: u32) -> Assign {
    let n = points.len();
    let mut a = Assign { a1: vec![0; n], d1: vec![f64::INFINITY; n], d2: vec![f64::INFINITY; n] };
    for (i, p) in points.iter().enumerate() {
        for (j, c) in centers.iter().enumerate() {
            let v = pow_z(sq_dist(&p.coords, c), z);
            if v < a.d1[i] {
                a.d2[i] = a.d1[i];
                a.d1[i] = v;
                a.a1[i] = j;
            } else if v < a.d2[i] {
                a.d2[i] = v;
            }
        }
    }
    a
}

fn weighted_sum(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

const LOCAL_SEARCH_ROUNDS: usize = 40;
const SWAP_CANDIDATES: usize = 8;
const REFINE_ROUNDS: usize = 10;

/// Constant-factor approximation: D^z seeding, single-swap local search with
/// a (1 + eps/k) improvement threshold, then IRLS center refinement.
pub fn solve_approx(points: &[WeightedPoint], num_centers: usize, z: u32, eps: f64, seed: u64) -> Result<Solution> {
    if num_centers == 0 {
        return Err(Error::param("num_centers must be at least 1"));
    }
    if points.is_empty() {
        return Ok(Solution { centers: CenterSet::default(), cost: 0.0, assignment: Vec::new() });
    }
    let distinct = distinct_points(points);
    if distinct.len() <= num_centers {
        let centers = CenterSet::new(distinct);
        let r = cost(points, &centers, z)?;
        return Ok(Solution { centers, cost: r.cost, assignment: r.assignment });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = points.iter().map(|p| p.w()).collect();
    let n = points.len();

    // seeding
    let first = WeightedIndex::new(&w).map_err(|_| Error::param("weights must be positive"))?.sample(&mut rng);
    let mut centers: Vec<Vec<f64>> = vec![points[first].coords.clone()];
    let mut near: Vec<f64> = points.iter().map(|p| pow_z(sq_dist(&p.coords, &centers[0]), z)).collect();
    while centers.len() < num_centers {
        let probs: Vec<f64> = (0..n).map(|i| w[i] * near[i]).collect();
        let idx = match WeightedIndex::new(&probs) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => break,
        };
        let c = points[idx].coords.clone();
        for i in 0..n {
            let v = pow_z(sq_dist(&points[i].coords, &c), z);
            if v < near[i] {
                near[i] = v;
            }
        }
        centers.push(c);
    }

    // local search
    let kc = centers.len();
    let threshold = 1.0 + eps / kc as f64;
    let mut a = assign(points, &centers, z);
    let mut cur = weighted_sum(&w, &a.d1);
    let mut dc = vec![0.0; n];
    for _ in 0..LOCAL_SEARCH_ROUNDS {
        if cur <= 0.0 {
            break;
        }
        let probs: Vec<f64> = (0..n).map(|i| w[i] * a.d1[i]).collect();
        let dist = match WeightedIndex::new(&probs) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for _ in 0..SWAP_CANDIDATES {
            let ci = dist.sample(&mut rng);
            let c = &points[ci].coords;
            for i in 0..n {
                dc[i] = pow_z(sq_dist(&points[i].coords, c), z);
            }
            let mut base = 0.0;
            let mut adj = vec![0.0; kc];
            for i in 0..n {
                let keep = if dc[i] < a.d1[i] { dc[i] } else { a.d1[i] };
                base += w[i] * keep;
                let alt = if dc[i] < a.d2[i] { dc[i] } else { a.d2[i] };
                adj[a.a1[i]] += w[i] * (alt - keep);
            }
            for j in 0..kc {
                let v = base + adj[j];
                if best.map_or(true, |b| v < b.0) {
                    best = Some((v, j, ci));
                }
            }
        }
        match best {
            Some((v, j, ci)) if v * threshold < cur => {
                centers[j] = points[ci].coords.clone();
                a = assign(points, &centers, z);
                cur = weighted_sum(&w, &a.d1);
            }
            _ => break,
        }
    }

    // refinement: weighted mean for z=2, Weiszfeld-type reweighting otherwise
    let d = points[0].coords.len();
    for _ in 0..REFINE_ROUNDS {
        let mut sums = vec![vec![0.0; d]; kc];
        let mut mass = vec![0.0; kc];
        for i in 0..n {
            let j = a.a1[i];
            let dist = libm::sqrt(sq_dist(&points[i].coords, &centers[j]));
            let omega = if z == 2 { w[i] } else { w[i] * libm::pow(dist.max(1e-9), z as f64 - 2.0) };
            mass[j] += omega;
            for t in 0..d {
                sums[j][t] += omega * points[i].coords[t];
            }
        }
        let mut next = centers.clone();
        for j in 0..kc {
            if mass[j] > 0.0 {
                for t in 0..d {
                    next[j][t] = sums[j][t] / mass[j];
                }
            }
        }
        let na = assign(points, &next, z);
        let nc = weighted_sum(&w, &na.d1);
        if nc < cur * (1.0 - 1e-12) {
            centers = next;
            a = na;
            cur = nc;
        } else {
            break;
        }
    }

    let centers = CenterSet::new(centers);
    let r = cost(points, &centers, z)?;
    Ok(Solution { centers, cost: r.cost, assignment: r.assignment })
}

/// Reduce a weighted bicriteria center multiset to k centers.
pub fn bicriteria_to_k(big: &CenterSet, weights: &[f64], k: usize, z: u32, eps: f64, seed: u64) -> Result<CenterSet> {
    if big.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: big.len(), got: weights.len() });
    }
    let pts: Vec<WeightedPoint> = big
        .centers
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, &w)| WeightedPoint::new(c.clone(), weight_from_f64(w)))
        .collect();
    if pts.is_empty() {
        return Ok(CenterSet::new(big.centers.iter().take(k).cloned().collect()));
    }
    Ok(solve_approx(&pts, k, z, eps, seed)?.centers)
}

/// Rational approximation of a positive real weight (denominator 2^20).
pub fn weight_from_f64(w: f64) -> crate::geometry::Weight {
    let scaled = libm::round(w * (1u64 << 20) as f64).max(1.0) as u128;
    num_rational::Ratio::new(scaled, 1u128 << 20)
}
