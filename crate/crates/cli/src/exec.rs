use rayon::prelude::*;
use uquant_core::exec::Executor;

use crate::error::{CliError, CliResult};

/// Runs indexed tasks on a dedicated rayon pool. Output order follows the
/// index, so results do not depend on the number of threads.
#[derive(Debug)]
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `None` uses rayon's default thread count.
    pub fn new(threads: Option<usize>) -> CliResult<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {threads:?} threads: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map_indexed<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(task).collect())
    }
}
