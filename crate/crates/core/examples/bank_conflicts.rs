//! Shared-memory bank conflicts of a 128x64 half-precision tile, plain and
//! with the 128-byte swizzle.
//!
//! `cargo run --example bank_conflicts`

use fmha_sim::layout::{ComposedLayout, IntTuple, Layout};
use fmha_sim::memsim::{bank_conflicts, Sweep};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = IntTuple::ints(&[128, 64]);
    let plain = Layout::row_major(shape.clone());
    let atom = ComposedLayout::k_major_sw128_atom(2)?;
    let swizzled = atom.tile_to_shape(&shape)?;
    println!("swizzled tile: {swizzled}");
    for sweep in [Sweep::Row, Sweep::Column] {
        println!(
            "{sweep:?} sweep: plain {} way, swizzled {} way",
            bank_conflicts(&plain, sweep, 2),
            bank_conflicts(&swizzled, sweep, 2)
        );
    }
    Ok(())
}
