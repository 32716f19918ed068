//! Data-parallel helpers. With the `parallel` feature (default) work is
//! spread over the rayon pool; without it every call runs sequentially.
//! Either way results come back in index order, so outputs never depend
//! on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn available_parallelism() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Computes `f(0), …, f(n-1)`. On failure, returns the error of the
/// lowest failing index.
pub fn try_map_indexed<T, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let results: Vec<Result<T, E>> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(&f).collect(),
        _ => (0..n).map(&f).collect(),
    };
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_first_error_are_schedule_independent() {
        for exec in [Execution::Parallel, Execution::Sequential] {
            let v: Result<Vec<usize>, ()> = try_map_indexed(exec, 1000, |i| Ok(i * i));
            assert_eq!(v.unwrap()[999], 999 * 999);
            let e: Result<Vec<usize>, usize> =
                try_map_indexed(exec, 1000, |i| if i % 100 == 37 { Err(i) } else { Ok(i) });
            assert_eq!(e, Err(37));
        }
    }
}
