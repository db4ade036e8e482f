use std::collections::{BTreeMap, BTreeSet};

use crate::layout::{IndexMap, IntTuple};

pub const BANK_COUNT: usize = 32;
pub const BANK_WIDTH_BYTES: usize = 4;
const PHASE_THREADS: usize = 32;

/// How the 32 threads of a phase walk a two-dimensional tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Thread `t` reads row `r0 + t` of one column.
    Column,
    /// Thread `t` reads column `c0 + t` of one row.
    Row,
}

/// Worst number of distinct 4-byte words hitting one bank within a phase.
/// Threads reading the same word are served together.
pub fn phase_conflict_degree(byte_addresses: &[usize]) -> usize {
    let mut banks: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &a in byte_addresses {
        let word = a / BANK_WIDTH_BYTES;
        banks.entry(word % BANK_COUNT).or_default().insert(word);
    }
    banks.values().map(BTreeSet::len).max().unwrap_or(0)
}

/// Maximum conflict degree over every phase of `sweep` over a rank-2
/// `(rows, cols)` layout of `elem_bytes`-sized elements.
pub fn bank_conflicts(layout: &impl IndexMap, sweep: Sweep, elem_bytes: usize) -> usize {
    let shape = layout.shape();
    let modes = shape.modes();
    assert_eq!(modes.len(), 2, "bank model expects a (rows, cols) layout");
    let (rows, cols) = (modes[0].size(), modes[1].size());
    let addr = |r: usize, c: usize| {
        layout
            .index_md(&IntTuple::ints(&[r, c]))
            .expect("coordinate in range")
            * elem_bytes
    };
    let mut worst = 0;
    match sweep {
        Sweep::Column => {
            for c in 0..cols {
                for r0 in (0..rows).step_by(PHASE_THREADS) {
                    let phase: Vec<usize> = (r0..(r0 + PHASE_THREADS).min(rows))
                        .map(|r| addr(r, c))
                        .collect();
                    worst = worst.max(phase_conflict_degree(&phase));
                }
            }
        }
        Sweep::Row => {
            for r in 0..rows {
                for c0 in (0..cols).step_by(PHASE_THREADS) {
                    let phase: Vec<usize> = (c0..(c0 + PHASE_THREADS).min(cols))
                        .map(|c| addr(r, c))
                        .collect();
                    worst = worst.max(phase_conflict_degree(&phase));
                }
            }
        }
    }
    worst
}
