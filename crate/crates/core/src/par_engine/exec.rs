//! Work distribution for one round: a rayon pool when the `parallel` feature
//! is enabled and more than one worker is requested, a plain loop otherwise.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    /// `workers == 0` uses the machine default, `workers == 1` the sequential path.
    pub fn new(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if workers == 1 {
                None
            } else {
                let mut builder = rayon::ThreadPoolBuilder::new();
                if workers > 1 {
                    builder = builder.num_threads(workers);
                }
                // Pool creation only fails on resource exhaustion; fall back to the loop.
                builder.build().ok()
            };
            Self { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Self {}
        }
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Run `f(i)` for every `i in 0..n`.
    pub fn for_each<F>(&self, n: usize, f: F)
    where
        F: Fn(usize) + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            pool.install(|| (0..n).into_par_iter().for_each(&f));
            return;
        }
        (0..n).for_each(f)
    }

    /// Sum of `f(i)` over `0..n`.
    pub fn sum<F>(&self, n: usize, f: F) -> usize
    where
        F: Fn(usize) -> usize + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).sum());
        }
        (0..n).map(f).sum()
    }

    /// `f(i)` for every `i in 0..n`, collected in index order.
    pub fn map_collect<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }
}
