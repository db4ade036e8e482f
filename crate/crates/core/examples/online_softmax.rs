//! Streaming one row through the online softmax, tile by tile.
//!
//! `cargo run --example online_softmax`

use fmha_sim::attention::{online_softmax_step, Matrix, SoftmaxState};

fn main() {
    let row = [0.5f32, 3.0, -1.0, 2.0, 7.5, 0.0, 1.25, 6.0];
    let mut st = SoftmaxState::new(1, 1);
    for (j, chunk) in row.chunks(3).enumerate() {
        let step = online_softmax_step(
            &mut st,
            &Matrix::from_vec(1, chunk.len(), chunk.to_vec()),
            j == 0,
        );
        println!(
            "tile {j}: max {:>4} sum {:.6} rescale {:?}",
            st.row_max[0].1, st.row_sum[0], step.rescale
        );
    }

    let m = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let sum: f32 = row.iter().map(|x| (x - m).exp()).sum();
    println!("one shot: max {m:>4} sum {sum:.6}");
}
