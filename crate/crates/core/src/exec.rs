//! Execution strategy for independent work items (sweep points, quadrature
//! nodes). Results are always assembled by index, so output does not depend on
//! the number of workers or on completion order.

/// How to evaluate a batch of independent tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon data parallelism. `workers: None` uses the global pool.
    /// Without the `parallel` feature this behaves like `Sequential`.
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: None }
    }
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers: Some(workers) }
        }
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match *self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel { workers } => parallel_map(workers, n, f),
        }
    }

    /// Like [`Execution::map`], stopping at the first error by index.
    pub fn try_map<R, E, F>(&self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<R, F>(workers: Option<usize>, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;

    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<R>>();
    // Nested calls reuse the pool they are already running in.
    match workers {
        Some(w) if rayon::current_thread_index().is_none() => {
            match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            }
        }
        _ => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<R, F>(_workers: Option<usize>, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}
