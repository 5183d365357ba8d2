//! Thin dispatch layer between the rayon data-parallel paths and the
//! sequential fallback. Both paths perform identical per-item arithmetic,
//! so results are bit-identical regardless of feature flags or pool size.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each chunk of `data` (chunk index, chunk slice).
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(i, c);
        }
    }
}

/// Map indices `0..n` through `f`, preserving order.
pub(crate) fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Zip three equally-chunked mutable slices (field + its two ψ arrays) and
/// apply `f(chunk_index, a, b, c)`.
pub(crate) fn for_each_chunk_mut3<T, F>(
    a: &mut [T],
    b: &mut [T],
    c: &mut [T],
    chunk: usize,
    f: F,
) where
    T: Send,
    F: Fn(usize, &mut [T], &mut [T], &mut [T]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(chunk)
            .zip(b.par_chunks_mut(chunk))
            .zip(c.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(i, ((ca, cb), cc))| f(i, ca, cb, cc));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, ((ca, cb), cc)) in a
            .chunks_mut(chunk)
            .zip(b.chunks_mut(chunk))
            .zip(c.chunks_mut(chunk))
            .enumerate()
        {
            f(i, ca, cb, cc);
        }
    }
}
