//! Online sensitivities: the enumerative oracle, the charging-bound
//! estimator and the online sampling process.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{powi, CenterSet, WeightedPoint};
use crate::net::{CandidateNet, DistanceTable};
use crate::prf;
use crate::sampling::InclusionProb;
use crate::solve::solve_approx;

/// Candidate grid for the oracle: the bounding box grown by one step so a
/// center away from every point is always available.
fn oracle_net(points: &[WeightedPoint], step: f64) -> Result<CandidateNet> {
    if points.is_empty() {
        return Ok(CandidateNet::new(Vec::new()));
    }
    let mut ext: Vec<WeightedPoint> = points.to_vec();
    let d = points[0].coords.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for i in 0..d.min(p.coords.len()) {
            lo[i] = lo[i].min(p.coords[i]);
            hi[i] = hi[i].max(p.coords[i]);
        }
    }
    ext.push(WeightedPoint::unit(lo.iter().map(|v| v - step).collect()));
    ext.push(WeightedPoint::unit(hi.iter().map(|v| v + step).collect()));
    CandidateNet::over_box(&ext, step)
}

/// sigma_t for every prefix of the stream, maximized over all center sets
/// of size 1..=k in the candidate grid.
pub fn online_sensitivities_exact(stream: &[WeightedPoint], k: usize, z: u32, step: f64) -> Result<Vec<f64>> {
    let net = oracle_net(stream, step)?;
    net.check_budget(k)?;
    let rows: Vec<&[f64]> = stream.iter().map(|p| p.coords.as_slice()).collect();
    let w: Vec<f64> = stream.iter().map(|p| p.w()).collect();
    let table = DistanceTable::new(&rows, &net, z);
    let mut best = vec![0.0f64; stream.len()];
    for size in 1..=k.min(net.len()) {
        table.for_each_subset(size, |_, mins| {
            let mut den = 0.0;
            for t in 0..mins.len() {
                let num = w[t] * mins[t];
                den += num;
                if den > 0.0 {
                    let r = num / den;
                    if r > best[t] {
                        best[t] = r;
                    }
                }
            }
        });
    }
    for b in &mut best {
        *b = b.min(1.0);
    }
    Ok(best)
}

/// sigma of the last point of the prefix.
pub fn online_sensitivity_exact(prefix: &[WeightedPoint], k: usize, z: u32, step: f64) -> Result<f64> {
    if prefix.is_empty() {
        return Err(Error::param("prefix must contain the query point"));
    }
    Ok(*online_sensitivities_exact(prefix, k, z, step)?.last().unwrap())
}

/// Per-point sensitivity upper bounds from an approximate clustering:
/// alpha 2^z w d^z / cost + 3 2^(2z-1) w / W(cluster), capped at 1.
pub fn charging_bounds(points: &[WeightedPoint], k: usize, z: u32, alpha: f64, eps: f64, seed: u64) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let sol = solve_approx(points, k, z, eps, seed)?;
    let mut mass = vec![0.0; sol.centers.len()];
    for (p, &j) in points.iter().zip(&sol.assignment) {
        mass[j] += p.w();
    }
    let two_z = powi(2.0, z);
    let size_term = 3.0 * powi(2.0, 2 * z - 1);
    Ok(points
        .iter()
        .zip(&sol.assignment)
        .map(|(p, &j)| {
            let w = p.w();
            let d = sol.centers.nearest(&p.coords, z).1;
            let a = if sol.cost > 0.0 { alpha * two_z * w * d / sol.cost } else { 0.0 };
            (a + size_term * w / mass[j]).min(1.0)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineSensEstimate {
    pub sigma_hat: f64,
    pub p: f64,
    pub charge_to_cost: f64,
    pub charge_to_cluster_size: f64,
    pub center: usize,
    pub dist: f64,
}

/// Approximate clustering of the prefix with running per-cluster counts.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub k: usize,
    pub z: u32,
    pub alpha: f64,
    pub centers: CenterSet,
    pub cluster_sizes: Vec<f64>,
    pub running_cost: f64,
    pub seen: u64,
    pub count_sampled: u64,
}

impl SamplerState {
    pub fn new(k: usize, z: u32, alpha: f64) -> Self {
        SamplerState { k, z, alpha, centers: CenterSet::default(), cluster_sizes: Vec::new(), running_cost: 0.0, seen: 0, count_sampled: 0 }
    }

    /// Recluster from a weighted summary of the prefix.
    pub fn refresh(&mut self, substrate: &[WeightedPoint], eps: f64, seed: u64) -> Result<()> {
        if substrate.is_empty() {
            return Ok(());
        }
        let sol = solve_approx(substrate, self.k, self.z, eps, seed)?;
        let mut mass = vec![0.0; sol.centers.len()];
        for (p, &j) in substrate.iter().zip(&sol.assignment) {
            mass[j] += p.w();
        }
        let total: f64 = mass.iter().sum();
        let scale = if total > 0.0 { self.seen as f64 / total } else { 0.0 };
        self.cluster_sizes = mass.iter().map(|m| m * scale).collect();
        self.running_cost = sol.cost * scale;
        self.centers = sol.centers;
        Ok(())
    }

    pub fn estimate(&self, x: &[f64], gamma: f64) -> OnlineSensEstimate {
        if self.centers.is_empty() {
            return OnlineSensEstimate { sigma_hat: 1.0, p: 1.0, charge_to_cost: 1.0, charge_to_cluster_size: 1.0, center: 0, dist: 0.0 };
        }
        let z = self.z;
        let (j, dist) = self.centers.nearest(x, z);
        let denom = self.running_cost + dist;
        let charge_to_cost = if dist > 0.0 && denom > 0.0 { self.alpha * powi(2.0, z) * dist / denom } else { 0.0 };
        let charge_to_cluster_size = 3.0 * powi(2.0, 2 * z - 1) / (self.cluster_sizes[j] + 1.0);
        let sigma_hat = (charge_to_cost + charge_to_cluster_size).min(1.0);
        let p = (2.0 * gamma * sigma_hat).min(1.0);
        OnlineSensEstimate { sigma_hat, p, charge_to_cost, charge_to_cluster_size, center: j, dist }
    }

    pub fn observe(&mut self, est: &OnlineSensEstimate) {
        if !self.centers.is_empty() {
            self.cluster_sizes[est.center] += 1.0;
            self.running_cost += est.dist;
        }
        self.seen += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensitivityMode {
    Estimate,
    Oracle { step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPoint {
    pub index: u64,
    pub point: WeightedPoint,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OnlineSampleRun {
    pub samples: Vec<SampledPoint>,
    pub sigma: Vec<f64>,
    pub sigma_sum: f64,
    pub prob_sum: f64,
}

/// Sampling and reweighting of one arrival given its probability.
pub fn bernoulli_emit(x: &WeightedPoint, p: f64, seed: u64, index: u64) -> Option<WeightedPoint> {
    let q = InclusionProb::at_least(p);
    if q.draw(prf::derive(seed, 0x5a17), index) {
        Some(WeightedPoint::new(x.coords.clone(), x.weight * q.denom() as u128))
    } else {
        None
    }
}

/// Online sensitivity sampling. In estimate mode the approximate clustering
/// is recomputed from the emitted sample whenever t doubles.
pub fn online_sample(
    stream: &[WeightedPoint],
    k: usize,
    z: u32,
    eps: f64,
    gamma: f64,
    alpha: f64,
    mode: SensitivityMode,
    seed: u64,
) -> Result<OnlineSampleRun> {
    let mut run = OnlineSampleRun::default();
    let exact = match mode {
        SensitivityMode::Oracle { step } => Some(online_sensitivities_exact(stream, k, z, step)?),
        SensitivityMode::Estimate => None,
    };
    let mut state = SamplerState::new(k, z, alpha);
    let mut emitted: Vec<WeightedPoint> = Vec::new();
    let mut next_refresh = 1u64;
    for (t, x) in stream.iter().enumerate() {
        let t = t as u64;
        let (sigma, p) = match &exact {
            Some(s) => (s[t as usize], (gamma * s[t as usize]).min(1.0)),
            None => {
                if t >= next_refresh {
                    state.refresh(&emitted, eps, prf::derive(seed, t))?;
                    next_refresh *= 2;
                }
                let est = state.estimate(&x.coords, gamma);
                state.observe(&est);
                (est.sigma_hat, est.p)
            }
        };
        run.sigma.push(sigma);
        run.sigma_sum += sigma;
        run.prob_sum += p;
        if let Some(wp) = bernoulli_emit(x, p, seed, t) {
            emitted.push(wp.clone());
            state.count_sampled += 1;
            run.samples.push(SampledPoint { index: t, point: wp, p });
        }
    }
    Ok(run)
}
