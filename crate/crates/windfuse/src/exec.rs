//! Thread-pool executor for cross-validation folds and study cells.

use rayon::prelude::*;
use windfuse_core::exec::Executor;

/// Runs items on the global rayon pool; results keep index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map_indices<T: Send>(&self, n: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..n).into_par_iter().map(f).collect()
    }
}
