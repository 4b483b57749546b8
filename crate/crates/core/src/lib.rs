//! Streaming coreset algorithms for Euclidean (k,z)-clustering.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! experiment drivers live in the `kzstream` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bicriteria;
pub mod coreset;
pub mod dynamic;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod insert;
pub mod merge_reduce;
pub mod meter;
pub mod net;
pub mod params;
pub mod prf;
pub mod sampling;
pub mod sensitivity;
pub mod sketch;
pub mod solve;
pub mod transport;

pub use coreset::{Coreset, Provenance};
pub use error::{Error, Result};
pub use geometry::{cost, dist_z, CenterSet, Dataset, Point, Weight, WeightedPoint};
pub use params::ClusterParams;
