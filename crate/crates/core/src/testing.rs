//! Shared proptest strategies for the unit tests.

use proptest::prelude::*;

use crate::layout::{IntTuple, Layout};

/// Power-of-two extents with strides chosen so the leaves cover disjoint
/// index ranges, in shuffled order, optionally with a broadcast leaf.
pub fn disjoint_pow2_layout(max_rank: usize) -> impl Strategy<Value = Layout> {
    (
        prop::collection::vec((0u32..4, 0u32..2), 1..=max_rank),
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(modes, perm_seed, broadcast)| {
            let mut leaves = Vec::new();
            let mut reach = 1usize;
            for (e, gap) in modes {
                let d = reach << gap;
                let n = 1usize << e;
                leaves.push((n, d));
                reach = d * n;
            }
            if broadcast {
                leaves.push((2, 0));
            }
            // deterministic Fisher-Yates from the seed
            let mut state = perm_seed | 1;
            for i in (1..leaves.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                leaves.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let (s, d): (Vec<_>, Vec<_>) = leaves.into_iter().unzip();
            Layout::new(IntTuple::ints(&s), IntTuple::ints(&d)).unwrap()
        })
}
