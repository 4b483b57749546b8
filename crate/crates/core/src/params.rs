use crate::error::{Error, Result};

/// Problem parameters shared by every algorithm in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub k: usize,
    pub z: u32,
    pub eps: f64,
    pub d: usize,
    pub delta: u64,
    pub seed: u64,
}

impl ClusterParams {
    pub fn new(k: usize, z: u32, eps: f64, d: usize, delta: u64, seed: u64) -> Result<Self> {
        let p = ClusterParams { k, z, eps, d, delta, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if self.z == 0 || self.z > 16 {
            return Err(Error::param("z must be in 1..=16"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param("eps must lie in (0,1)"));
        }
        if self.d == 0 {
            return Err(Error::param("d must be at least 1"));
        }
        if self.delta < 2 || !self.delta.is_power_of_two() || self.delta > (1 << 31) {
            return Err(Error::param("delta must be a power of two in [2, 2^31]"));
        }
        Ok(())
    }

    /// Number of grid levels above the finest one: log2(delta).
    pub fn ell(&self) -> u32 {
        self.delta.trailing_zeros()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
