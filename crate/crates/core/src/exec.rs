//! Execution policy for batches of independent evaluations.
//!
//! With the `parallel` feature (on by default) work is spread over a rayon
//! pool; without it, or with [`Execution::Sequential`], items run in order on
//! the calling thread. Results always come back in input order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// One worker per logical processor.
    #[default]
    Parallel,
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(0 | 1) => Execution::Sequential,
            Some(n) => Execution::Workers(n),
        }
    }

    /// Applies `f` to every item, preserving order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => par_map(items, &f),
            #[cfg(feature = "parallel")]
            Execution::Workers(n) => match rayon::ThreadPoolBuilder::new().num_threads(*n).build() {
                Ok(pool) => pool.install(|| par_map(items, &f)),
                Err(_) => par_map(items, &f),
            },
            #[cfg(not(feature = "parallel"))]
            _ => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: &F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
}
