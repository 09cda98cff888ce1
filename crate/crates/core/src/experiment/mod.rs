//! Experiment runners behind the command-line tool.

pub mod coherence;
pub mod config;
pub mod fit;
pub mod ingest;
pub mod output;
pub mod shift_scan;
pub mod tomo;

pub use config::{CoherenceConfig, ExperimentConfig, LifetimeModel, ScanMode, ShiftScanConfig};
pub use output::{CurvePoint, Metadata, Output};

/// Runs `f` on a rayon pool of `workers` threads, or the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> crate::Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::invalid("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
