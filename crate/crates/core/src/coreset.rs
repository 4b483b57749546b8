//! Offline sensitivity sampling and the net-based coreset verifier.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{cost_value, total_weight, CenterSet, WeightedPoint};
use crate::net::{CandidateNet, DistanceTable};
use crate::params::ClusterParams;
use crate::prf;
use crate::sampling::InclusionProb;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    OfflineSample,
    MergeReduce,
    TwoPass,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::OfflineSample => "offline-sample",
            Provenance::MergeReduce => "merge-reduce",
            Provenance::TwoPass => "two-pass",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "offline-sample" => Some(Provenance::OfflineSample),
            "merge-reduce" => Some(Provenance::MergeReduce),
            "two-pass" => Some(Provenance::TwoPass),
            _ => None,
        }
    }
}

/// Weighted point multiset with the accuracy it is meant to certify.
#[derive(Debug, Clone, PartialEq)]
pub struct Coreset {
    pub items: Vec<WeightedPoint>,
    pub eps_contract: f64,
    pub params: ClusterParams,
    pub provenance: Provenance,
}

impl Coreset {
    pub fn empty(params: ClusterParams, provenance: Provenance) -> Self {
        Coreset { items: Vec::new(), eps_contract: 0.0, params, provenance }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        total_weight(&self.items)
    }

    pub fn cost(&self, centers: &CenterSet) -> Result<f64> {
        cost_value(&self.items, centers, self.params.z)
    }
}

/// How the per-point sensitivities are turned into probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleBudget {
    /// p = min(1, c (k^2 d / eps^2) (1 + ln k) q).
    Theorem,
    /// p = min(1, lambda q) with lambda chosen so the expected size is the target.
    TargetSize(f64),
}

/// Leading constant in front of the sampling multiplier.
pub const THEOREM_CONSTANT: f64 = 4.0;

pub fn theorem_multiplier(params: &ClusterParams) -> f64 {
    let k = params.k as f64;
    THEOREM_CONSTANT * k * k * params.d as f64 / (params.eps * params.eps) * (1.0 + libm::log(k))
}

/// Scale lambda with sum_i min(1, lambda q_i) = target.
pub fn target_scale(q: &[f64], target: f64) -> f64 {
    if target >= q.len() as f64 {
        return f64::INFINITY;
    }
    let expected = |lambda: f64| q.iter().map(|&v| (lambda * v).min(1.0)).sum::<f64>();
    let qmin = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, 1.0 / qmin);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Probabilities actually used for each point.
pub fn sampling_probs(params: &ClusterParams, sens: &[f64], budget: SampleBudget) -> Result<Vec<InclusionProb>> {
    for &q in sens {
        if !(q > 0.0) {
            return Err(Error::param("sensitivity upper bounds must be positive"));
        }
    }
    let lambda = match budget {
        SampleBudget::Theorem => theorem_multiplier(params),
        SampleBudget::TargetSize(m) => target_scale(sens, m),
    };
    Ok(sens.iter().map(|&q| InclusionProb::at_least(lambda * q)).collect())
}

/// Independent Bernoulli sampling with reweighting by 1/p.
pub fn build_coreset_offline(
    points: &[WeightedPoint],
    params: &ClusterParams,
    sens: &[f64],
    budget: SampleBudget,
    seed: u64,
) -> Result<Coreset> {
    if sens.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: sens.len() });
    }
    let probs = sampling_probs(params, sens, budget)?;
    let draw_seed = prf::derive(seed, 0x0ff1);
    let mut items = Vec::new();
    for (i, (p, prob)) in points.iter().zip(&probs).enumerate() {
        if prob.draw(draw_seed, i as u64) {
            items.push(WeightedPoint::new(p.coords.clone(), p.weight * prob.denom() as u128));
        }
    }
    Ok(Coreset { items, eps_contract: params.eps, params: *params, provenance: Provenance::OfflineSample })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub pass: bool,
    pub worst_ratio: f64,
    pub witness: CenterSet,
    pub checked: u64,
}

const VERIFY_SLACK: f64 = 1e-9;

/// Check the two-sided coreset bound for every center set of size 1..=k
/// drawn from the candidate grid over the bounding box of `x`.
pub fn verify_coreset(coreset: &Coreset, x: &[WeightedPoint], step: f64) -> Result<VerifyReport> {
    let net = CandidateNet::over_box(x, step)?;
    verify_coreset_on(coreset, x, &net)
}

pub fn verify_coreset_on(coreset: &Coreset, x: &[WeightedPoint], net: &CandidateNet) -> Result<VerifyReport> {
    let k = coreset.params.k;
    let z = coreset.params.z;
    let eps = coreset.eps_contract;
    if x.is_empty() || net.is_empty() {
        let pass = coreset.is_empty();
        return Ok(VerifyReport { pass, worst_ratio: if pass { 1.0 } else { f64::INFINITY }, witness: CenterSet::default(), checked: 0 });
    }
    net.check_budget(k)?;
    let n = x.len();
    let rows: Vec<&[f64]> = x.iter().chain(coreset.items.iter()).map(|p| p.coords.as_slice()).collect();
    let w: Vec<f64> = x.iter().chain(coreset.items.iter()).map(|p| p.w()).collect();
    let table = DistanceTable::new(&rows, net, z);
    let mut worst = 1.0f64;
    let mut witness: Vec<usize> = Vec::new();
    let mut checked = 0u64;
    for size in 1..=k.min(net.len()) {
        table.for_each_subset(size, |chosen, mins| {
            checked += 1;
            let mut cx = 0.0;
            for i in 0..n {
                cx += w[i] * mins[i];
            }
            let mut cs = 0.0;
            for i in n..mins.len() {
                cs += w[i] * mins[i];
            }
            let r = if cx > 0.0 {
                cs / cx
            } else if cs > 0.0 {
                f64::INFINITY
            } else {
                1.0
            };
            if (r - 1.0).abs() > (worst - 1.0).abs() {
                worst = r;
                witness = chosen.to_vec();
            }
        });
    }
    let pass = (worst - 1.0).abs() <= eps + VERIFY_SLACK;
    let witness = CenterSet::new(witness.iter().map(|&j| net.candidates[j].clone()).collect());
    Ok(VerifyReport { pass, worst_ratio: worst, witness, checked })
}
