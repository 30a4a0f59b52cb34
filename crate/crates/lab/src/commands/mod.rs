//! Command implementations shared by the CLI and the test suites.

use crate::error::{LabError, Result};
use std::path::Path;

pub mod ablate;
pub mod curves;
pub mod pool_gen;
pub mod separation_cmd;
pub mod simulate;
pub mod verify_bounds;

/// Runs `f` inside a rayon pool with the requested worker count (the
/// process-wide default pool when unset). Results must not depend on
/// the count; estimator merges are associative by construction.
pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| LabError::Io(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}
