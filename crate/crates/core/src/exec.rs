//! Index-range parallelism with a sequential fallback. Results always come
//! back in index order, whichever strategy runs.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// The hit with the smallest index, if any.
    pub fn find_first<T, F>(self, n: usize, f: F) -> Option<T>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().find_map_first(f)
            }
            _ => (0..n).find_map(f),
        }
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads (sequentially when the
/// parallel feature is off).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let sq = |i: usize| i * i;
        assert_eq!(Exec::Sequential.map(100, sq), Exec::Parallel.map(100, sq));
        let hit = |i: usize| (i % 7 == 3 && i > 20).then_some(i);
        assert_eq!(Exec::Parallel.find_first(1000, hit), Some(24));
        assert_eq!(Exec::Sequential.find_first(1000, hit), Some(24));
        assert_eq!(with_jobs(2, || Exec::Parallel.map(5, |i| i)), vec![0, 1, 2, 3, 4]);
    }
}
