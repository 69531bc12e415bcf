//! Replica-level parallelism.
//!
//! All Monte Carlo work goes through [`map_replicas`]. Results are collected
//! in replica order, so output is identical for any thread count. Without
//! the `parallel` feature everything runs on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How replicas are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Evaluates `f(0..count)` and returns the results in index order.
pub fn map_replicas<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..count).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => (0..count).map(f).collect(),
    }
}

/// Runs `f` inside a pool with `threads` workers (ignored without the
/// `parallel` feature).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_replicas(Execution::Sequential, 100, |i| i * i);
        let par = with_threads(Some(4), || map_replicas(Execution::Parallel, 100, |i| i * i));
        assert_eq!(seq, par);
    }
}
