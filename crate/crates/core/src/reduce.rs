//! Fixed-shape tree reduction over frame blocks.
//!
//! Frames are cut into blocks of [`BLOCK_FRAMES`]; block results are merged
//! along a binary tree whose shape depends only on the block count. Any
//! executor that evaluates the two halves of a node, in any order or in
//! parallel, therefore produces bit-identical sums. Within a block terms are
//! added sequentially, so the overall summation is a blocked pairwise sum.

use core::ops::Range;

/// Frames accumulated sequentially in one leaf.
pub const BLOCK_FRAMES: usize = 128;

/// Runs two closures, possibly in parallel.
pub trait Join {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send;
}

/// Evaluates both closures on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Join for Sequential {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        let ra = a();
        (ra, b())
    }
}

/// Number of leaf blocks covering `frames` frames.
pub fn block_count(frames: usize) -> usize {
    frames.div_ceil(BLOCK_FRAMES)
}

pub fn block_range(block: usize, frames: usize) -> Range<usize> {
    let start = block * BLOCK_FRAMES;
    start..(start + BLOCK_FRAMES).min(frames)
}

/// Reduces `leaf(range)` over all blocks of `0..frames` with `merge`.
///
/// Returns `None` when `frames == 0`.
pub fn tree_reduce<T, E, J, L, M>(frames: usize, join: &J, leaf: &L, merge: &M) -> Option<Result<T, E>>
where
    T: Send,
    E: Send,
    J: Join + Sync,
    L: Fn(Range<usize>) -> Result<T, E> + Sync,
    M: Fn(T, T) -> T + Sync,
{
    let blocks = block_count(frames);
    if blocks == 0 {
        return None;
    }
    Some(node(0..blocks, frames, join, leaf, merge))
}

fn node<T, E, J, L, M>(blocks: Range<usize>, frames: usize, join: &J, leaf: &L, merge: &M) -> Result<T, E>
where
    T: Send,
    E: Send,
    J: Join + Sync,
    L: Fn(Range<usize>) -> Result<T, E> + Sync,
    M: Fn(T, T) -> T + Sync,
{
    if blocks.len() == 1 {
        return leaf(block_range(blocks.start, frames));
    }
    let mid = blocks.start + blocks.len() / 2;
    let (left, right) = join.join(
        || node(blocks.start..mid, frames, join, leaf, merge),
        || node(mid..blocks.end, frames, join, leaf, merge),
    );
    Ok(merge(left?, right?))
}
