//! Sample-level parallelism.
//!
//! Work items are indexed and results come back in index order, so any
//! reduction over them is independent of the number of workers.

use crate::error::Result;

#[cfg(feature = "parallel")]
pub fn try_map_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..count).map(f).collect()
}

/// Runs `job` with at most `workers` threads (`0` keeps the default pool).
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R>(_workers: usize, job: impl FnOnce() -> R) -> R {
    job()
}
