//! Rayon-backed executor for the per-belief stage solves.

use anyhow::Result;
use rayon::prelude::*;

use cib_core::runner::ParallelMap;

/// Environment variable capping worker parallelism.
pub const THREADS_ENV: &str = "CIBGAMES_THREADS";

pub struct RayonRunner {
    pool: rayon::ThreadPool,
}

impl RayonRunner {
    /// Builds a pool with `threads` workers; falls back to the
    /// `CIBGAMES_THREADS` environment variable and then to the machine's
    /// core count.
    pub fn new(threads: Option<usize>) -> Result<RayonRunner> {
        let from_env = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads.or(from_env) {
            builder = builder.num_threads(n);
        }
        Ok(RayonRunner { pool: builder.build()? })
    }
}

impl ParallelMap for RayonRunner {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let f = &f;
        self.pool
            .install(|| (0..n).into_par_iter().map(f).collect())
    }
}
