//! Pluggable execution of independent per-belief stage solves.
//!
//! The solvers map a pure function over a list of jobs; results are
//! assembled in input order, so any executor yields identical output. The
//! core crate ships the serial executor; the CLI crate provides a rayon
//! thread-pool implementation.

/// Maps `f` over `0..n`, returning results in index order.
pub trait ParallelMap {
    fn run<T, F>(&self, n: usize, f: F) -> alloc::vec::Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs jobs on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialRunner;

impl ParallelMap for SerialRunner {
    fn run<T, F>(&self, n: usize, f: F) -> alloc::vec::Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}
