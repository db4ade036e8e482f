//! Which accumulator cells each of the 128 warpgroup threads owns.
//!
//! `cargo run --example wgmma_fragments [thread]`

use fmha_sim::attention::Matrix;
use fmha_sim::wgmma_map::{fragment_rows, Fragment, ThreadValueLayout};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let thread: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(0);
    let c = ThreadValueLayout::clayout_64x64();
    println!("{c}");

    let (r0, r1) = c.rows_of(thread);
    println!("thread {thread} owns rows {r0} and {r1}");
    for v in 0..8 {
        println!("  value {v} -> {:?}", c.tv_to_mn(thread, v)?);
    }

    // a 64x64 tile with cell (m, n) holding 100*m + n
    let tile = Matrix::from_fn(64, 64, |m, n| (100 * m + n) as f32);
    let frag = Fragment::load_accumulator(&tile, thread)?;
    println!("fragment layout {}", frag.layout());
    println!(
        "rows {:?}, first values {:?}",
        fragment_rows(&frag),
        &frag.values()[..8]
    );

    let mut back = Matrix::zeros(64, 64);
    for t in 0..128 {
        Fragment::load_accumulator(&tile, t)?.store(&mut back);
    }
    assert_eq!(back, tile);
    println!("all 128 fragments stored back reproduce the tile");
    Ok(())
}
