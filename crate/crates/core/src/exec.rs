//! Dispatch of independent per-collocation-point work.

use alloc::vec::Vec;

/// Runs `count` independent jobs and returns their results in index order.
///
/// Implementations may run jobs concurrently, but the returned vector must be
/// ordered by job index so results land in grid-ordered slots.
pub trait PointExecutor: Sync {
    fn map_indexed<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl PointExecutor for Sequential {
    fn map_indexed<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(job).collect()
    }
}
