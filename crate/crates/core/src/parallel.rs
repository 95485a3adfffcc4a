//! Execution strategy for the data-parallel loops (Gram rows, oracle grids,
//! experiment tables).
//!
//! With the `parallel` feature (default) `Execution::Parallel` dispatches to
//! rayon; without it every strategy runs sequentially. Both paths produce
//! identical output: work items are independent and results are collected in
//! index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` when this strategy actually runs on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluate `f` on `0..n`, returning results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Smallest index in `0..n` for which `f` returns `Some`, with its value.
    pub fn find_first<T, F>(self, n: usize, f: F) -> Option<(usize, T)>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n)
                .into_par_iter()
                .filter_map(|i| f(i).map(|v| (i, v)))
                .min_by_key(|(i, _)| *i);
        }
        (0..n).find_map(|i| f(i).map(|v| (i, v)))
    }

    /// Minimum of `f` over `0..n` (ties go to the smaller index); `None` when
    /// `f` yields nothing.
    pub fn min_by_value<F>(self, n: usize, f: F) -> Option<(usize, f64)>
    where
        F: Fn(usize) -> Option<f64> + Sync + Send,
    {
        let better = |a: (usize, f64), b: (usize, f64)| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n)
                .into_par_iter()
                .filter_map(|i| f(i).map(|v| (i, v)))
                .reduce_with(better);
        }
        (0..n).filter_map(|i| f(i).map(|v| (i, v))).reduce(better)
    }
}
