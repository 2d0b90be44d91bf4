//! Chunked map that runs on rayon when the `parallel` feature is on.

/// Evaluates `f(0..count)` and returns the results in index order.
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Splits `total` work items into chunks of at most `chunk` items; returns
/// `(chunk id, start, len)` triples.
pub(crate) fn chunks(total: usize, chunk: usize) -> Vec<(usize, usize, usize)> {
    let chunk = chunk.max(1);
    (0..total.div_ceil(chunk))
        .map(|c| {
            let start = c * chunk;
            (c, start, chunk.min(total - start))
        })
        .collect()
}
