//! Global-memory traffic of dense versus fused attention.
//!
//! `cargo run --release --example traffic_report [seqlen]`

use fmha_sim::attention::{AttentionProblem, Precision, TileConfig};
use fmha_sim::memsim::{
    run_fmha_traced, run_standard_traced, write_csv, Region, SimConfig, TensorClass,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(256);
    let p = AttentionProblem::gaussian(1, n, 1, 64, 1)?;
    let cfg = SimConfig::default();

    let (_, std) = run_standard_traced(&p, &cfg);
    let mut rows = std.rows();
    for (bm, bn) in TileConfig::GRID {
        let (_, fused) = run_fmha_traced(&p, TileConfig::new(bm, bn, 64), Precision::F32, &cfg)?;
        let delta =
            std.region_total(Region::Gmem).total() - fused.region_total(Region::Gmem).total();
        eprintln!(
            "bM={bm:<3} bN={bn:<3} saves {delta} gmem bytes, smem peak {}",
            fused.smem_peak
        );
        rows.extend(fused.rows());
    }
    let sp = std.counter(Region::Gmem, TensorClass::S).total()
        + std.counter(Region::Gmem, TensorClass::P).total();
    eprintln!("dense S/P gmem traffic: {sp} bytes");
    write_csv(&rows, std::io::stdout())?;
    Ok(())
}
