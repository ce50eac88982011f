//! Replicate execution.

use alloc::vec::Vec;

/// Runs `count` independent tasks and returns their results in index order.
///
/// Implementations may run tasks concurrently, but the returned vector must
/// always be ordered by task index.
pub trait Executor: Sync {
    fn map_indexed<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(task).collect()
    }
}
