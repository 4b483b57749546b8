//! Merge-and-reduce tree over blocks of weighted points.

use alloc::vec::Vec;

use crate::coreset::{build_coreset_offline, Coreset, Provenance, SampleBudget};
use crate::error::Result;
use crate::geometry::{powi, WeightedPoint};
use crate::params::ClusterParams;
use crate::prf;
use crate::sensitivity::charging_bounds;

pub const DEFAULT_REDUCE_CONSTANT: f64 = 40.0;
pub const REDUCE_ALPHA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeReduceConfig {
    pub params: ClusterParams,
    pub block_size: usize,
    pub reduce_size: usize,
    pub expected_len: u64,
    pub eps_per_level: f64,
    pub level_budget: u32,
}

fn reduce_size_for(params: &ClusterParams, eps_l: f64, c: f64) -> usize {
    let k = params.k as f64;
    let inner = (1.0 / powi(eps_l, params.z)).min(k);
    libm::ceil(c * k / (eps_l * eps_l) * inner).max(1.0) as usize
}

fn levels_for(expected_len: u64, block: usize) -> u32 {
    let blocks = expected_len.div_ceil(block.max(1) as u64).max(1);
    (64 - (blocks - 1).leading_zeros()).max(1)
}

impl MergeReduceConfig {
    /// Defaults: reduce size c (k/eps_l^2) min(1/eps_l^z, k) with c = 40,
    /// block size equal to the reduce size, and eps_l = ln(1+eps)/L for L
    /// levels so the compounded error stays within eps.
    pub fn new(params: &ClusterParams, expected_len: u64) -> Self {
        Self::with_constant(params, expected_len, DEFAULT_REDUCE_CONSTANT, None)
    }

    pub fn with_constant(params: &ClusterParams, expected_len: u64, c: f64, block_size: Option<usize>) -> Self {
        let mut levels = 1u32;
        let mut cfg = None;
        for _ in 0..16 {
            let eps_l = libm::log1p(params.eps) / levels as f64;
            let reduce_size = reduce_size_for(params, eps_l, c);
            let block = block_size.unwrap_or(reduce_size).max(1);
            let next = levels_for(expected_len, block);
            cfg = Some(MergeReduceConfig { params: *params, block_size: block, reduce_size, expected_len, eps_per_level: eps_l, level_budget: levels });
            if next <= levels {
                break;
            }
            levels = next;
        }
        cfg.unwrap()
    }

    pub fn eps_at_level(&self, level: u32) -> f64 {
        libm::pow(1.0 + self.eps_per_level, level as f64) - 1.0
    }
}

#[derive(Debug, Clone)]
pub struct MergeReduceTree {
    pub cfg: MergeReduceConfig,
    open: Vec<WeightedPoint>,
    levels: Vec<Option<Vec<WeightedPoint>>>,
    pub blocks: u64,
    pub reduces: u64,
    pub inserted: u64,
    pub overrun: bool,
}

impl MergeReduceTree {
    pub fn new(cfg: MergeReduceConfig) -> Self {
        MergeReduceTree { cfg, open: Vec::new(), levels: Vec::new(), blocks: 0, reduces: 0, inserted: 0, overrun: false }
    }

    pub fn insert(&mut self, wp: WeightedPoint) -> Result<()> {
        self.open.push(wp);
        self.inserted += 1;
        if self.open.len() >= self.cfg.block_size {
            let block = core::mem::take(&mut self.open);
            self.blocks += 1;
            self.carry(block)?;
        }
        Ok(())
    }

    fn carry(&mut self, mut items: Vec<WeightedPoint>) -> Result<()> {
        let mut level = 0usize;
        loop {
            if self.levels.len() <= level {
                self.levels.push(None);
            }
            match self.levels[level].take() {
                None => {
                    self.levels[level] = Some(items);
                    if level as u32 > self.cfg.level_budget {
                        self.overrun = true;
                    }
                    return Ok(());
                }
                Some(mut other) => {
                    other.extend(items);
                    items = self.reduce(other)?;
                    level += 1;
                }
            }
        }
    }

    fn reduce(&mut self, merged: Vec<WeightedPoint>) -> Result<Vec<WeightedPoint>> {
        let seed = prf::hash2(self.cfg.params.seed ^ 0x7265_6475_6365, self.reduces);
        self.reduces += 1;
        let params = ClusterParams { eps: self.cfg.eps_per_level.min(0.999), ..self.cfg.params };
        let q = charging_bounds(&merged, params.k, params.z, REDUCE_ALPHA, params.eps, seed)?;
        let c = build_coreset_offline(&merged, &params, &q, SampleBudget::TargetSize(self.cfg.reduce_size as f64), seed)?;
        Ok(c.items)
    }

    /// Union of all live buffers and the open block, without re-reduction.
    pub fn query(&self) -> Coreset {
        let mut items = Vec::new();
        let mut eps: f64 = 0.0;
        for (t, buf) in self.levels.iter().enumerate() {
            if let Some(b) = buf {
                items.extend(b.iter().cloned());
                eps = eps.max(self.cfg.eps_at_level(t as u32));
            }
        }
        items.extend(self.open.iter().cloned());
        Coreset { items, eps_contract: eps, params: self.cfg.params, provenance: Provenance::MergeReduce }
    }

    /// Levels currently holding a buffer.
    pub fn live_levels(&self) -> Vec<usize> {
        self.levels.iter().enumerate().filter(|(_, b)| b.is_some()).map(|(t, _)| t).collect()
    }

    pub fn stored_items(&self) -> usize {
        self.levels.iter().flatten().map(|b| b.len()).sum::<usize>() + self.open.len()
    }

    pub fn open_len(&self) -> usize {
        self.open.len()
    }
}
