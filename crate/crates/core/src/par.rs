//! Execution policy for the data-parallel loops (strategy enumeration, sweep
//! grid points). Without the `parallel` feature both policies run sequentially.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `items`, preserving input order in the output.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
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

    /// Maps `f` over `0..n` and folds the results with `pick`, which must be
    /// associative. The reduction is deterministic when `pick` is.
    pub fn map_reduce<R, F, P>(self, n: usize, identity: R, f: F, pick: P) -> R
    where
        R: Send + Sync + Clone,
        F: Fn(usize) -> R + Sync + Send,
        P: Fn(R, R) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n)
                    .into_par_iter()
                    .map(f)
                    .reduce(|| identity.clone(), &pick)
            }
            _ => (0..n).map(f).fold(identity, pick),
        }
    }
}
