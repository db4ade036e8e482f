//! Reusing the first GEMM's accumulator registers as the second GEMM's
//! A operand without moving any values.
//!
//! `cargo run --example reshape_operand [bM bN d]`

use fmha_sim::cli::{reshape_layouts, static_form};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let shapes = match args.as_slice() {
        [bm, bn, d] => vec![(*bm, *bn, *d)],
        _ => vec![(128, 128, 128), (64, 128, 128)],
    };
    for (bm, bn, d) in shapes {
        let [acc, op, reshaped] = reshape_layouts(bm, bn, d)?;
        println!("tile {bm}x{bn}x{d}");
        println!("  accumulator  {}", static_form(&acc));
        println!("  operand      {}", static_form(&op));
        println!("  tOrPLayout   {}", static_form(&reshaped));
        println!("  identity     {}", reshaped == op);
    }
    Ok(())
}
