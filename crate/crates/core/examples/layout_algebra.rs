//! Shape:stride layouts: evaluation, coalescing, composition and tiling.
//!
//! `cargo run --example layout_algebra`

use fmha_sim::layout::{compose, tile_to_shape, IntTuple, Layout};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let row_major: Layout = "(4,4):(4,1)".parse()?;
    let seq: Vec<usize> = (0..row_major.size()).map(|i| row_major.call(i)).collect();
    println!("{row_major} visits {seq:?}");

    let nested: Layout = "((2,2),(2,4)):((1,2),(4,8))".parse()?;
    println!("{nested} coalesces to {}", nested.coalesce());

    // pick every other column of an 8x8 column-major matrix
    let a = Layout::column_major(IntTuple::ints(&[8, 8]));
    let b: Layout = "(8,4):(1,16)".parse()?;
    let c = compose(&a, &b)?;
    println!("{a} o {b} = {c}");
    for i in 0..b.size() {
        assert_eq!(c.call(i), a.call(b.call(i)));
    }

    let atom: Layout = "(8,8):(8,1)".parse()?;
    let tiled = tile_to_shape(&atom, &IntTuple::ints(&[16, 32]))?;
    println!(
        "{atom} tiled to (16,32): {tiled}, bijective: {}",
        tiled.is_bijective()
    );
    Ok(())
}
