/// How data-parallel loops are executed.
///
/// `Parallel` uses the ambient rayon pool when the `parallel` feature is
/// enabled and silently degrades to `Sequential` otherwise. Every loop that
/// honours this setting reduces in an order-independent (or explicitly
/// ordered) way, so both modes produce bit-identical output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `0..n` through `map` and folds the results with `reduce`.
    ///
    /// `reduce` must be associative and commutative on the values produced
    /// (integer counters, multiset merges); the split points differ between
    /// modes and thread counts.
    #[cfg_attr(not(feature = "parallel"), allow(unused_variables))]
    pub(crate) fn map_reduce<T, M, R>(self, n: u64, identity: fn() -> T, map: M, reduce: R) -> T
    where
        T: Send,
        M: Fn(&mut T, u64) + Sync + Send,
        R: Fn(T, T) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n)
                    .into_par_iter()
                    .fold(identity, |mut acc, i| {
                        map(&mut acc, i);
                        acc
                    })
                    .reduce(identity, reduce)
            }
            _ => {
                let mut acc = identity();
                for i in 0..n {
                    map(&mut acc, i);
                }
                acc
            }
        }
    }

    /// Order-preserving map over a slice.
    pub(crate) fn map_collect<I, O, F>(self, items: &[I], f: F) -> Vec<O>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> O + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }
}

/// Pairwise summation; the result depends only on the order of `values`.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}
