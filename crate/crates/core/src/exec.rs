//! Parallel map helpers.
//!
//! Work units (chains, replications, simulator arms) carry their own seeded
//! generator streams, so results are identical whichever path runs them;
//! outputs are collected in index order. With the `parallel` feature (the
//! default) [`map_indexed`] fans out over the current rayon pool; without it
//! the sequential path is the only one compiled.

/// Sequential baseline, always available.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Data-parallel map over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_par(n, f)
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i * i) as u64 + 1;
        let seq = map_indexed_seq(64, f);
        let any = map_indexed(64, f);
        assert_eq!(seq, any);
        #[cfg(feature = "parallel")]
        assert_eq!(seq, map_indexed_par(64, f));
    }
}
