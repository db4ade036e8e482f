//! Issue/complete timeline of one Q tile with the K prefetch.
//!
//! `cargo run --example overlap_trace [n_tiles_k] [copy_cost]`

use fmha_sim::attention::TileConfig;
use fmha_sim::memsim::{trace_overlap, CostModel, EventKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>());
    let n = args.next().transpose()?.unwrap_or(3) as usize;
    let copy = args.next().transpose()?.unwrap_or(2);
    let costs = CostModel {
        copy,
        ..CostModel::default()
    };
    let t = trace_overlap(TileConfig::new(64, 64, 64), n, costs);
    print!("{}", t.to_text());
    if n > 1 {
        let k1 = t.find(EventKind::CopyK(1)).unwrap();
        let g0 = t.find(EventKind::GemmII(0)).unwrap();
        println!(
            "COPY-K[1] issued at {}, GEMM-II[0] completes at {}",
            k1.issue, g0.complete
        );
    }
    println!("span {}, prefetch holds: {}", t.span(), t.prefetch_holds());
    Ok(())
}
