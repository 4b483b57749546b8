//! File formats, run manifests, stream runners and experiment drivers for
//! `kzstream-core`.

pub mod coreset_file;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod runner;
pub mod sketch_file;
pub mod stream;

pub use error::{CliError, CliResult};

/// Worker pool sized by `KZ_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("KZ_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}
