//! Two-pass coresets for dynamic (insert/delete) streams.

mod offset;
mod pass_one;
mod pass_two;

pub use offset::{offset_roundtrip, rounding_base, OffsetCode, OffsetLayout, Rounder};
pub use pass_one::{pass_one, PassOne, PassOneSummary};
pub use pass_two::{pass_two, sampling_probability, sensitivity_from_summary, PassTwo, PassTwoReport, SurrogateNet};

use crate::geometry::Point;
use crate::params::ClusterParams;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicUpdate {
    pub point: Point,
    pub delta: i64,
}

impl DynamicUpdate {
    pub fn insert(point: Point) -> Self {
        DynamicUpdate { point, delta: 1 }
    }

    pub fn delete(point: Point) -> Self {
        DynamicUpdate { point, delta: -1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicMode {
    KMedian,
    Kz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicConfig {
    /// Independent shifted grids; None picks max(3, ceil(k d log2 log2 delta / 2)).
    pub shifts: Option<usize>,
    pub cauchy_reps: usize,
    /// Cell budget of the coarse occupancy sketches; None picks 4 k log2 delta.
    pub coarse_capacity: Option<usize>,
    /// Upper clamp on the measured distortion gamma.
    pub max_gamma: f64,
    /// Subsets tried by the exhaustive stage of the center search.
    pub search_budget: usize,
    /// Independence of the pass-two sampling hash.
    pub hash_independence: usize,
    /// Multiplier on the pass-two inclusion probability.
    pub sample_constant: f64,
    /// Upper bound on the recovery sketch sparsity.
    pub recovery_cap: usize,
    /// Overrides the offset rounding base (KZ mode).
    pub offset_base: Option<f64>,
    /// Net step for the sensitivity surrogate; None uses 2^ceil(l/2).
    pub surrogate_step: Option<f64>,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        DynamicConfig {
            shifts: None,
            cauchy_reps: 200,
            coarse_capacity: None,
            max_gamma: 4.0,
            search_budget: 20_000,
            hash_independence: 8,
            sample_constant: 1.0,
            recovery_cap: 1 << 14,
            offset_base: None,
            surrogate_step: None,
        }
    }
}

impl DynamicConfig {
    pub fn shift_count(&self, params: &ClusterParams) -> usize {
        self.shifts.unwrap_or_else(|| {
            let ll = libm::log2(params.ell().max(2) as f64);
            (libm::ceil(params.k as f64 * params.d as f64 * ll / 2.0) as usize).max(3)
        })
    }

    pub fn coarse_cap(&self, params: &ClusterParams) -> usize {
        self.coarse_capacity.unwrap_or(4 * params.k * params.ell().max(1) as usize)
    }
}
