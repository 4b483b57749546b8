//! Second pass: sensitivity surrogate from the first-pass summary, universe
//! sampling by a t-wise independent hash, and exact sparse recovery.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_rational::Ratio;

use super::offset::{rounding_beta, OffsetLayout, Rounder};
use super::pass_one::{for_each_combination, words_for, PassOneSummary};
use super::{DynamicConfig, DynamicMode, DynamicUpdate};
use crate::coreset::{Coreset, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{pow_z, sq_dist, Point, WeightedPoint};
use crate::meter::{Component, MemoryMeter};
use crate::net::{binom, cartesian, ENUMERATION_BUDGET};
use crate::params::ClusterParams;
use crate::prf;
use crate::sampling::InclusionProb;
use crate::sketch::{SparseRecoverySketch, TwiseHash};

/// Candidate center sets with their surrogate denominators
/// Cost(S_w, C) + Z~, which do not depend on the queried point.
#[derive(Debug, Clone)]
pub struct SurrogateNet {
    pub candidates: Vec<Vec<f64>>,
    pub subsets: Vec<Vec<usize>>,
    pub denoms: Vec<f64>,
    pub factor: f64,
    pub z: u32,
    pub empty: bool,
}

impl SurrogateNet {
    pub fn new(sum: &PassOneSummary, cfg: &DynamicConfig) -> Result<Self> {
        let p = &sum.params;
        let factor = (1u64 << p.z) as f64 * 4.0 * sum.gamma;
        if sum.empty {
            return Ok(SurrogateNet { candidates: Vec::new(), subsets: Vec::new(), denoms: Vec::new(), factor, z: p.z, empty: true });
        }
        let step = cfg.surrogate_step.unwrap_or((1u64 << p.ell().div_ceil(2)) as f64);
        let axis: Vec<f64> = (0..).map(|j| 1.0 + j as f64 * step).take_while(|&v| v <= p.delta as f64).collect();
        let mut candidates = cartesian(&alloc::vec![axis; p.d]);
        for c in &sum.centers.centers {
            if !candidates.contains(c) {
                candidates.push(c.clone());
            }
        }
        let k = p.k.min(candidates.len());
        let total: u128 = (1..=k).map(|j| binom(candidates.len(), j)).sum();
        if total > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded { needed: total, budget: ENUMERATION_BUDGET });
        }
        let mut subsets = Vec::new();
        for j in 1..=k {
            for_each_combination(candidates.len(), j, |idx| subsets.push(idx.to_vec()));
        }
        // dist_z from every candidate to every center of S
        let table: Vec<Vec<f64>> =
            candidates.iter().map(|c| sum.centers.centers.iter().map(|s| pow_z(sq_dist(s, c), p.z)).collect()).collect();
        let denoms = subsets
            .iter()
            .map(|sub| {
                let cost: f64 = (0..sum.centers.len())
                    .map(|j| sum.weights[j] as f64 * sub.iter().map(|&c| table[c][j]).fold(f64::INFINITY, f64::min))
                    .sum();
                cost + sum.z_tilde
            })
            .collect();
        Ok(SurrogateNet { candidates, subsets, denoms, factor, z: p.z, empty: false })
    }

    /// q(x) = min(1, max_C 2^z 4 gamma dist(x,C)^z / (Cost(S_w,C) + Z~)).
    pub fn q(&self, x: &[f64]) -> f64 {
        if self.empty {
            return 1.0;
        }
        let dists: Vec<f64> = self.candidates.iter().map(|c| pow_z(sq_dist(x, c), self.z)).collect();
        let mut best: f64 = 0.0;
        for (sub, &den) in self.subsets.iter().zip(&self.denoms) {
            let num = sub.iter().map(|&c| dists[c]).fold(f64::INFINITY, f64::min);
            if num <= 0.0 {
                continue;
            }
            if den <= 0.0 {
                return 1.0;
            }
            best = best.max(num / den);
        }
        (self.factor * best).min(1.0)
    }
}

pub fn sensitivity_from_summary(sum: &PassOneSummary, x: &Point, cfg: &DynamicConfig) -> Result<f64> {
    Ok(SurrogateNet::new(sum, cfg)?.q(&x.to_f64()))
}

/// p(x) = min(1, c (k^2 d / eps^2) (1 + ln k) q(x)), quantized to 1/m.
pub fn sampling_probability(params: &ClusterParams, cfg: &DynamicConfig, q: f64) -> InclusionProb {
    let k = params.k as f64;
    let mult = cfg.sample_constant * k * k * params.d as f64 / (params.eps * params.eps) * (1.0 + libm::log(k));
    InclusionProb::at_least((mult * q).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassTwoReport {
    pub sampled_updates: u64,
    /// Sum over updates of delta * p(x): the expected surviving sample mass.
    pub expected_samples: f64,
    pub recovered: usize,
    pub sparsity_budget: usize,
    pub code_bits: u32,
    pub peak_words: u64,
    /// Decoded multiset equals the shadow dictionary of sampled survivors.
    pub shadow_agrees: Option<bool>,
}

pub struct PassTwo {
    params: ClusterParams,
    cfg: DynamicConfig,
    net: SurrogateNet,
    cprime: crate::geometry::CenterSet,
    hash: TwiseHash,
    recovery: SparseRecoverySketch,
    rounder: Option<(Rounder, OffsetLayout)>,
    sampled: u64,
    expected: f64,
    shadow: Option<BTreeMap<u128, (i64, i128)>>,
    meter: MemoryMeter,
}

impl PassTwo {
    pub fn new(sum: &PassOneSummary, cfg: DynamicConfig, expected_len: u64) -> Result<Self> {
        let params = sum.params;
        let net = SurrogateNet::new(sum, &cfg)?;
        let s = (sum.total_mass.max(1) as usize).min(cfg.recovery_cap.max(1));
        let recovery = SparseRecoverySketch::new(s, prf::derive(params.seed, 0x2ec0));
        let hash = TwiseHash::new(cfg.hash_independence, prf::derive(params.seed, 0x7a5e));
        let rounder = match sum.mode {
            DynamicMode::KMedian => None,
            DynamicMode::Kz if sum.empty => None,
            DynamicMode::Kz => {
                let r = match cfg.offset_base {
                    Some(b) => Rounder::from_base(b)?,
                    None => Rounder::from_beta(rounding_beta(&params))?,
                };
                let layout = OffsetLayout::new(params.d, sum.cprime.len(), &r, 1.0 / 256.0, 3.0 * params.delta as f64)?;
                Some((r, layout))
            }
        };
        let mut meter = MemoryMeter::new(expected_len.max(1), params.d, params.delta);
        meter.begin_phase("pass-two");
        let wb = meter.word_bits();
        meter.set(Component::SketchAccumulators, words_for(recovery.buckets().len() as u64 * 384, wb));
        meter.set(Component::HashCoefficients, cfg.hash_independence as u64);
        let summary_words = (sum.centers.len() + sum.cprime.len()) as u64 * crate::meter::words_per_point(params.d) + 2;
        meter.set(Component::SamplerState, summary_words);
        Ok(PassTwo {
            params,
            cfg,
            net,
            cprime: sum.cprime.clone(),
            hash,
            recovery,
            rounder,
            sampled: 0,
            expected: 0.0,
            shadow: None,
            meter,
        })
    }

    /// Keep an unmetered dictionary of sampled survivors for auditing.
    pub fn with_shadow(mut self) -> Self {
        self.shadow = Some(BTreeMap::new());
        self
    }

    pub fn meter(&self) -> &MemoryMeter {
        &self.meter
    }

    fn recovery_key(&self, point: &Point) -> Result<u128> {
        match &self.rounder {
            None => point.id(self.params.delta),
            Some((r, layout)) => layout.pack(&r.encode(&point.to_f64(), &self.cprime)?),
        }
    }

    pub fn update(&mut self, u: &DynamicUpdate) -> Result<()> {
        u.point.validate(self.params.d, self.params.delta)?;
        let q = self.net.q(&u.point.to_f64());
        let prob = sampling_probability(&self.params, &self.cfg, q);
        self.expected += u.delta as f64 * prob.prob();
        let id = u.point.id(self.params.delta)?;
        if !self.hash.sample_reciprocal(id, prob) {
            return Ok(());
        }
        self.sampled += 1;
        let key = self.recovery_key(&u.point)?;
        let payload = u.delta as i128 * prob.denom() as i128;
        self.recovery.update(key, u.delta, payload)?;
        if let Some(sh) = self.shadow.as_mut() {
            let e = sh.entry(key).or_insert((0, 0));
            e.0 += u.delta;
            e.1 += payload;
            if *e == (0, 0) {
                sh.remove(&key);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(Coreset, PassTwoReport)> {
        let decoded = self.recovery.decode()?;
        let mut items = Vec::new();
        for (&key, rec) in &decoded {
            if rec.count == 0 {
                continue;
            }
            if rec.count < 0 || rec.payload <= 0 {
                return Err(Error::Overflow("recovered entry with negative multiplicity"));
            }
            let coords = match &self.rounder {
                None => Point::from_id(key, self.params.d, self.params.delta).to_f64(),
                Some((r, layout)) => r.decode(&layout.unpack(key), &self.cprime)?,
            };
            items.push(WeightedPoint::new(coords, Ratio::from_integer(rec.payload as u128)));
        }
        let shadow_agrees = self.shadow.as_ref().map(|sh| {
            sh.len() == decoded.len() && sh.iter().all(|(k, &(c, p))| decoded.get(k).is_some_and(|r| r.count == c && r.payload == p))
        });
        let code_bits = match &self.rounder {
            None => crate::sketch::sparse::KEY_BITS.min(128 - (self.params.delta as u128).pow(self.params.d as u32).leading_zeros()),
            Some((_, layout)) => layout.bits(),
        };
        let report = PassTwoReport {
            sampled_updates: self.sampled,
            expected_samples: self.expected,
            recovered: items.len(),
            sparsity_budget: self.recovery.s(),
            code_bits,
            peak_words: self.meter.peak(),
            shadow_agrees,
        };
        let cs = Coreset { items, eps_contract: self.params.eps, params: self.params, provenance: Provenance::TwoPass };
        Ok((cs, report))
    }
}

/// Run the second pass over an in-memory replay of the stream.
pub fn pass_two<'a>(
    updates: impl IntoIterator<Item = &'a DynamicUpdate>,
    sum: &PassOneSummary,
    cfg: &DynamicConfig,
    expected_len: u64,
) -> Result<(Coreset, PassTwoReport)> {
    let mut p2 = PassTwo::new(sum, cfg.clone(), expected_len)?.with_shadow();
    for u in updates {
        p2.update(u)?;
    }
    p2.finish()
}
