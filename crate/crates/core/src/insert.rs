//! One-pass insertion-only pipeline: online sensitivity sampling feeding a
//! merge-and-reduce tree whose output is the sampler's clustering substrate.
//! Also the cost-only variant that first applies a JL projection.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coreset::Coreset;
use crate::error::{Error, Result};
use crate::geometry::{powi, Point, WeightedPoint};
use crate::merge_reduce::{MergeReduceConfig, MergeReduceTree, DEFAULT_REDUCE_CONSTANT};
use crate::meter::{words_per_point, Component, MemoryMeter};
use crate::params::ClusterParams;
use crate::prf;
use crate::sensitivity::{bernoulli_emit, OnlineSensEstimate, SamplerState};
use crate::solve::solve_approx;

pub const DEFAULT_ALPHA: f64 = 2.0;

/// c (d k / eps^2) ln(n delta / eps).
pub fn default_gamma(params: &ClusterParams, n: u64, c: f64) -> f64 {
    let base = params.d as f64 * params.k as f64 / (params.eps * params.eps);
    c * base * libm::log((n.max(2) as f64) * params.delta as f64 / params.eps)
}

/// 8 4^z k log2(n d delta)^2, an upper bound on the summed online sensitivities.
pub fn total_sensitivity_bound(n: u64, k: usize, z: u32, d: usize, delta: u64) -> f64 {
    let l = libm::log2((n.max(2) as f64) * (d.max(1) as f64) * (delta.max(2) as f64));
    8.0 * libm::pow(4.0, z as f64) * k as f64 * l * l
}

/// Expected number of points the sampler hands to the tree: at most
/// gamma times the sensitivity bound, and never more than n.
pub fn expected_tree_inputs(params: &ClusterParams, n: u64, gamma: f64) -> u64 {
    let b = gamma * total_sensitivity_bound(n, params.k, params.z, params.d, params.delta);
    (libm::ceil(b).max(1.0) as u64).min(n.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub tree: MergeReduceConfig,
}

impl InsertConfig {
    pub fn new(params: &ClusterParams, expected_len: u64) -> Self {
        let gamma = default_gamma(params, expected_len, 1.0);
        InsertConfig { gamma, alpha: DEFAULT_ALPHA, tree: MergeReduceConfig::new(params, expected_tree_inputs(params, expected_len, gamma)) }
    }

    pub fn tuned(params: &ClusterParams, expected_len: u64, gamma_constant: f64, reduce_constant: f64, block: Option<usize>) -> Self {
        let gamma = default_gamma(params, expected_len, gamma_constant);
        let inputs = expected_tree_inputs(params, expected_len, gamma);
        InsertConfig { gamma, alpha: DEFAULT_ALPHA, tree: MergeReduceConfig::with_constant(params, inputs, reduce_constant, block) }
    }
}

#[derive(Debug, Clone)]
pub struct InsertPipeline {
    pub params: ClusterParams,
    pub cfg: InsertConfig,
    pub sampler: SamplerState,
    pub tree: MergeReduceTree,
    pub meter: MemoryMeter,
    pub t: u64,
    next_refresh: u64,
    pub sigma_sum: f64,
}

impl InsertPipeline {
    pub fn new(params: &ClusterParams, expected_len: u64, cfg: InsertConfig) -> Self {
        let mut meter = MemoryMeter::new(expected_len, params.d, params.delta);
        meter.begin_phase("insert");
        InsertPipeline {
            params: *params,
            cfg,
            sampler: SamplerState::new(params.k, params.z, cfg.alpha),
            tree: MergeReduceTree::new(cfg.tree),
            meter,
            t: 0,
            next_refresh: 1,
            sigma_sum: 0.0,
        }
    }

    pub fn insert(&mut self, x: &WeightedPoint) -> Result<OnlineSensEstimate> {
        if x.coords.len() != self.params.d {
            return Err(Error::DimensionMismatch { expected: self.params.d, got: x.coords.len() });
        }
        if self.t >= self.next_refresh {
            let substrate = self.tree.query().items;
            self.sampler.refresh(&substrate, self.params.eps, prf::derive(self.params.seed, self.t))?;
            self.next_refresh *= 2;
        }
        let est = self.sampler.estimate(&x.coords, self.cfg.gamma);
        self.sampler.observe(&est);
        self.sigma_sum += est.sigma_hat;
        if let Some(wp) = bernoulli_emit(x, est.p, self.params.seed, self.t) {
            self.sampler.count_sampled += 1;
            self.tree.insert(wp)?;
        }
        self.t += 1;
        let d = self.params.d;
        self.meter.set(Component::TreeBuffers, self.tree.stored_items() as u64 * words_per_point(d));
        self.meter.set(Component::SamplerState, (self.sampler.centers.len() * (d + 1)) as u64 + 4);
        Ok(est)
    }

    pub fn insert_point(&mut self, p: &Point) -> Result<OnlineSensEstimate> {
        p.validate(self.params.d, self.params.delta)?;
        self.insert(&WeightedPoint::from_point(p))
    }

    pub fn query(&self) -> Coreset {
        let mut c = self.tree.query();
        c.eps_contract = self.params.eps;
        c
    }
}

/// Plain merge-and-reduce on the raw stream with the same meter.
#[derive(Debug, Clone)]
pub struct PlainMergeReduce {
    pub tree: MergeReduceTree,
    pub meter: MemoryMeter,
    d: usize,
}

impl PlainMergeReduce {
    pub fn new(params: &ClusterParams, expected_len: u64, tree: MergeReduceConfig) -> Self {
        PlainMergeReduce { tree: MergeReduceTree::new(tree), meter: MemoryMeter::new(expected_len, params.d, params.delta), d: params.d }
    }

    pub fn insert(&mut self, x: &WeightedPoint) -> Result<()> {
        self.tree.insert(x.clone())?;
        self.meter.set(Component::TreeBuffers, self.tree.stored_items() as u64 * words_per_point(self.d));
        Ok(())
    }
}

/// Seeded Gaussian projection scaled by 1/sqrt(m).
#[derive(Debug, Clone, PartialEq)]
pub struct JlProjector {
    pub m: usize,
    pub d: usize,
    matrix: Vec<f64>,
}

/// ceil(c z^4 / eps^2 ln(k / (eps delta))).
pub fn jl_target_dim(z: u32, eps: f64, k: usize, fail: f64, c: f64) -> usize {
    let v = c * powi(z as f64, 4) / (eps * eps) * libm::log(k as f64 / (eps * fail));
    libm::ceil(v).max(1.0) as usize
}

impl JlProjector {
    pub fn new(d: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / libm::sqrt(m as f64);
        let matrix = (0..m * d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale
            })
            .collect();
        JlProjector { m, d, matrix }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| self.matrix[i * self.d..(i + 1) * self.d].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Maps projected points back onto an integer lattice with granularity g.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeRounding {
    pub origin: Vec<f64>,
    pub granularity: f64,
    pub delta_out: u64,
}

impl LatticeRounding {
    /// g is the smallest power of two >= 2 sqrt(m)/eps, so rounding moves a
    /// point by at most eps/4 before rescaling.
    pub fn new(d: usize, m: usize, delta: u64, eps: f64) -> Result<Self> {
        let g = next_pow2(libm::ceil(2.0 * libm::sqrt(m as f64) / eps) as u64);
        let spread = next_pow2(libm::ceil(libm::sqrt(d as f64)) as u64);
        let delta_out = delta.checked_mul(g).and_then(|v| v.checked_mul(spread)).ok_or(Error::Overflow("lattice size"))?;
        if delta_out > 1 << 31 {
            return Err(Error::param("projected lattice exceeds 2^31"));
        }
        let origin = alloc::vec![(delta as f64 + 1.0) / 2.0; d];
        Ok(LatticeRounding { origin, granularity: g as f64, delta_out })
    }

    pub fn round(&self, proj: &JlProjector, x: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = x.iter().zip(&self.origin).map(|(a, o)| a - o).collect();
        let half = self.delta_out as f64 / 2.0;
        proj.project(&shifted)
            .into_iter()
            .map(|y| libm::round(self.granularity * y + half).clamp(1.0, self.delta_out as f64))
            .collect()
    }
}

fn next_pow2(v: u64) -> u64 {
    v.max(1).next_power_of_two()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostOnlyConfig {
    pub jl_constant: f64,
    pub fail_prob: f64,
    pub gamma_constant: f64,
    pub reduce_constant: f64,
}

impl Default for CostOnlyConfig {
    fn default() -> Self {
        CostOnlyConfig { jl_constant: 1.0, fail_prob: 0.01, gamma_constant: 1.0, reduce_constant: DEFAULT_REDUCE_CONSTANT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostOnlyReport {
    pub estimate: f64,
    pub m: usize,
    pub granularity: f64,
    pub coreset_len: usize,
    pub peak_words: u64,
}

/// Project, round to the finer lattice, run the insertion pipeline in m
/// dimensions and report the solve_approx cost of the final coreset,
/// rescaled by g^-z.
pub fn cost_only_pipeline(stream: &[WeightedPoint], params: &ClusterParams, cfg: &CostOnlyConfig) -> Result<CostOnlyReport> {
    let m = jl_target_dim(params.z, params.eps, params.k, cfg.fail_prob, cfg.jl_constant);
    let proj = JlProjector::new(params.d, m, prf::derive(params.seed, 0x4a4c));
    let lattice = LatticeRounding::new(params.d, m, params.delta, params.eps)?;
    let pparams = ClusterParams { d: m, delta: lattice.delta_out, ..*params };
    pparams.validate()?;
    let n = stream.len() as u64;
    let icfg = InsertConfig::tuned(&pparams, n, cfg.gamma_constant, cfg.reduce_constant, None);
    let mut pipe = InsertPipeline::new(&pparams, n, icfg);
    for x in stream {
        let y = lattice.round(&proj, &x.coords);
        pipe.insert(&WeightedPoint::new(y, x.weight))?;
    }
    let core = pipe.query();
    let sol = solve_approx(&core.items, params.k, params.z, params.eps, prf::derive(params.seed, 0x736f))?;
    Ok(CostOnlyReport {
        estimate: sol.cost / powi(lattice.granularity, params.z),
        m,
        granularity: lattice.granularity,
        coreset_len: core.len(),
        peak_words: pipe.meter.peak(),
    })
}
