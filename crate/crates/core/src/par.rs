//! Deterministic chunked execution.
//!
//! Work over `0..n` is split into fixed chunks whose boundaries depend only on
//! the problem size, never on the thread count. Chunk results are returned in
//! chunk order and callers fold them left to right, so a parallel run performs
//! exactly the same floating-point operations as a sequential one.

use std::ops::Range;

/// Target number of inner-loop iterations per chunk.
const CHUNK_WORK: usize = 1 << 16;

/// Splits the rows `0..n` of the upper-triangular pair set (row `i` owns the
/// pairs `(i, j)`, `j > i`) into chunks of roughly equal pair count.
pub(crate) fn pair_row_chunks(n: usize) -> Vec<Range<usize>> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut work = 0;
    for i in 0..n {
        work += n - 1 - i;
        if work >= CHUNK_WORK {
            chunks.push(start..i + 1);
            start = i + 1;
            work = 0;
        }
    }
    if start < n {
        chunks.push(start..n);
    }
    chunks
}

/// Splits `0..n` into chunks where every row costs `row_work` iterations.
pub(crate) fn uniform_chunks(n: usize, row_work: usize) -> Vec<Range<usize>> {
    let rows = (CHUNK_WORK / row_work.max(1)).max(1);
    (0..n).step_by(rows).map(|s| s..(s + rows).min(n)).collect()
}

/// Evaluates `f` on every chunk, in parallel when the `parallel` feature is on
/// and the current pool has more than one thread. Output order matches input
/// order in both modes.
pub(crate) fn map_chunks<T, F>(chunks: &[Range<usize>], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() > 1 && chunks.len() > 1 {
            use rayon::prelude::*;
            return chunks.par_iter().cloned().map(&f).collect();
        }
    }
    chunks.iter().cloned().map(f).collect()
}

/// Runs `f` with at most `threads` worker threads. `threads == 1` is the
/// sequential reference mode. Without the `parallel` feature this just calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("failed to build thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
