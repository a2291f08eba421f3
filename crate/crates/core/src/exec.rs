//! How independent work items (cross-validation folds, study cells) are run.
//! The core runs them in order; the `windfuse` crate supplies a thread-pool
//! executor.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// `(0..n).map(f)`, in index order.
    fn map_indices<T: Send>(&self, n: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indices<T: Send>(&self, n: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..n).map(f).collect()
    }
}
