//! Rayon executor for the core's fixed-shape reductions.

use ghoststat_core::reduce::Join;

use crate::error::{Error, Result};

/// Runs both halves of a reduction node with `rayon::join`.
///
/// The tree shape does not depend on the worker count, so results are
/// bit-identical for any pool size.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Join for Rayon {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        rayon::join(a, b)
    }
}

/// Runs `f` inside a pool of `threads` workers (0 = one per CPU).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}
