//! Writing and reading the binary tensor format, in f32 and f16 storage.
//!
//! `cargo run --example tensor_io`

use fmha_sim::attention::{StoragePrecision, Tensor4};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let t = Tensor4::gaussian([1, 64, 2, 16], &mut rng);
    println!("dims {:?}, gmem layout {}", t.dims(), t.gmem_layout());
    for storage in [StoragePrecision::F32, StoragePrecision::F16] {
        let mut buf = Vec::new();
        t.write_to(&mut buf, storage)?;
        let (back, _) = Tensor4::read_from(buf.as_slice())?;
        let worst = back
            .as_slice()
            .iter()
            .zip(t.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        println!(
            "{storage:?}: {} bytes, worst round-trip error {worst:e}",
            buf.len()
        );
    }
    Ok(())
}
