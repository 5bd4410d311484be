//! Data-parallel helpers. With the `parallel` feature these dispatch onto the
//! rayon pool; without it they run the same closures sequentially. Every
//! helper assigns each output slot to exactly one closure invocation, so
//! results do not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many scalar operations the parallel path is not worth the
/// scheduling overhead.
#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
pub(crate) const PAR_THRESHOLD: usize = 1 << 15;

/// Applies `f(row_index, row)` to every `width`-sized chunk of `data`.
pub(crate) fn for_each_row<F>(data: &mut [f64], width: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        if work >= PAR_THRESHOLD {
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
    }
    let _ = work;
    data.chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
}

/// Applies `f(first_row, block)` over blocks of `block_rows` rows.
pub(crate) fn for_each_block<F>(data: &mut [f64], width: usize, block_rows: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 || data.is_empty() {
        return;
    }
    let chunk = width * block_rows.max(1);
    #[cfg(feature = "parallel")]
    {
        if work >= PAR_THRESHOLD {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(b, block)| f(b * block_rows.max(1), block));
            return;
        }
    }
    let _ = work;
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(b, block)| f(b * block_rows.max(1), block));
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Number of worker threads the helpers will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Sizes the global pool. Must run before any parallel work; a no-op
/// without the `parallel` feature.
pub fn set_jobs(jobs: usize) -> crate::error::Result<()> {
    if jobs == 0 {
        return Err(crate::error::Error::InvalidInput("jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| crate::error::Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}
