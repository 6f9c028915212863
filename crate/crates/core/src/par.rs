use rayon::prelude::*;

/// Number of indices in `0..total` satisfying `pred`.
pub(crate) fn count_parallel<F>(total: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync,
{
    (0..total).into_par_iter().filter(|&i| pred(i)).count()
}

/// Ordered parallel map; results come back in index order so that any
/// subsequent reduction is independent of the thread count.
pub(crate) fn map_ordered<T, F>(total: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..total).into_par_iter().map(f).collect()
}
