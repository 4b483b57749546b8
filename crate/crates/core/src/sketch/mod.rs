//! Linear sketches: Cauchy L1 estimation, sparse recovery and t-wise hashing.

pub mod cauchy;
pub mod field;
pub mod sparse;
pub mod twise;

pub use cauchy::CauchySketch;
pub use sparse::SparseRecoverySketch;
pub use twise::TwiseHash;
