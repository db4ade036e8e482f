//! Fused attention against the dense reference over the four tile shapes.
//!
//! `cargo run --release --example fused_attention`

use fmha_sim::attention::{
    fmha_forward_counted, max_rel_error, standard_attention, AttentionProblem, Precision,
    TileConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = AttentionProblem::gaussian(1, 512, 2, 64, 7)?;
    let want = standard_attention(&p);
    println!("N=512 d=64 h=2, {} FLOPs", p.flops());
    for prec in [Precision::F32, Precision::F16Emu] {
        for (bm, bn) in TileConfig::GRID {
            let (got, saturated) = fmha_forward_counted(&p, TileConfig::new(bm, bn, 64), prec)?;
            let e = max_rel_error(&got, &want);
            println!(
                "{prec:>6} bM={bm:<3} bN={bn:<3} maxRelError {:.3e} at {:?}, saturated {saturated}",
                e.max_rel, e.at
            );
        }
    }
    Ok(())
}
