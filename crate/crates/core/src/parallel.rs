//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the maps below fan out over the rayon
//! global pool. Without it, or with [`Execution::Sequential`], they run in
//! order on the calling thread. Results are always returned in index order, so
//! callers see identical output either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<S, T, F>(exec: Execution, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let par = map_indices(Execution::Parallel, 1000, |i| i * i);
        let seq = map_indices(Execution::Sequential, 1000, |i| i * i);
        assert_eq!(par, seq);
        assert_eq!(par[31], 961);
    }

    #[test]
    fn slice_map_matches_iterator() {
        let xs: Vec<f64> = (0..257).map(|i| i as f64 * 0.5).collect();
        let out = map_slice(Execution::Parallel, &xs, |x| x.sqrt());
        let expected: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();
        assert_eq!(out, expected);
    }
}
