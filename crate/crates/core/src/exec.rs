//! Job execution strategies.
//!
//! The crate's batch workloads (oracle validation, replicate studies, grid
//! runs) are independent jobs whose outputs must not depend on how they are
//! scheduled. `map_jobs` runs them with rayon when the `parallel` feature is
//! enabled and falls back to plain iteration otherwise; both paths return
//! results in input order.

/// Sequential map, always available. Kept public so benchmarks can compare
/// the two paths directly on a parallel build.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Rayon map over the current thread pool. Order of results matches the
/// input slice regardless of execution order.
#[cfg(feature = "parallel")]
pub fn map_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items` with `workers` threads.
///
/// `workers == 0` uses the default pool size, `workers == 1` runs
/// sequentially, anything else runs on a dedicated pool of that size.
/// Without the `parallel` feature every setting runs sequentially.
pub fn map_jobs<T, U, F>(workers: usize, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        match workers {
            1 => map_seq(items, f),
            0 => map_par(items, f),
            w => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(|| map_par(items, f)),
                Err(_) => map_seq(items, f),
            },
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        map_seq(items, f)
    }
}
