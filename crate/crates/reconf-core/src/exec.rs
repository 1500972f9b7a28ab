//! Indexed map helpers with a data-parallel and a sequential execution path.
//!
//! Everything downstream that fans out over scenarios funnels through
//! [`map_indexed`] so results are assembled in index order no matter which
//! path ran or in what order items completed.

/// How to run an indexed batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Jobs {
    /// One item after another on the calling thread.
    Sequential,
    /// A rayon pool with the given thread count (0 = rayon's default).
    /// Falls back to sequential when the `parallel` feature is off.
    Parallel(usize),
}

impl Jobs {
    /// CLI convention: `--jobs 1` is sequential, anything else parallel.
    pub fn from_count(jobs: usize) -> Jobs {
        if jobs == 1 {
            Jobs::Sequential
        } else {
            Jobs::Parallel(jobs)
        }
    }
}

/// Apply `f` to every index in `0..n`, returning results in index order.
pub fn map_indexed<T, F>(jobs: Jobs, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match jobs {
        Jobs::Sequential => map_sequential(n, f),
        Jobs::Parallel(threads) => map_parallel(n, threads, f),
    }
}

/// The sequential path, always available (benches compare against it).
pub fn map_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
fn map_parallel<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("rayon pool");
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
fn map_parallel<T, F>(n: usize, _threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_sequential(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree_in_order() {
        let a = map_indexed(Jobs::Sequential, 17, |i| i * i);
        let b = map_indexed(Jobs::Parallel(4), 17, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a[16], 256);
    }

    #[test]
    fn jobs_from_count() {
        assert_eq!(Jobs::from_count(1), Jobs::Sequential);
        assert_eq!(Jobs::from_count(8), Jobs::Parallel(8));
    }
}
