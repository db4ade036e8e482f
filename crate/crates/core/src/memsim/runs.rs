use super::{MemError, MemSim, Region, RunReport, SimConfig, TensorClass};
use crate::attention::{
    fmha_head, scaled_abt, standard_softmax, AttentionProblem, FmhaEvent, Matrix, Precision,
    Tensor4, TileConfig,
};

/// Shared memory staged by the fused kernel: one Q, one K and one V tile.
pub fn smem_footprint(tile: TileConfig, config: &SimConfig) -> usize {
    let e = &config.elem_bytes;
    tile.bm * tile.bk * e.q + tile.bn * tile.bk * e.k + tile.bn * tile.bk * e.v
}

/// Dense attention with `S` and `P` written to and read back from simulated
/// global memory, one kernel per step.
pub fn run_standard_traced(p: &AttentionProblem, config: &SimConfig) -> (Tensor4, RunReport) {
    let mut sim = MemSim::new(config.clone());
    let [_, n, _, d] = p.dims();
    let mut out = Tensor4::zeros(p.dims());
    for (b, h) in p.heads() {
        sim.set_head((b, h));
        // S = scale · Q Kᵀ
        sim.read(Region::Gmem, TensorClass::Q, n * d, None);
        sim.read(Region::Gmem, TensorClass::K, n * d, None);
        let s = scaled_abt(&p.q.head(b, h), &p.k.head(b, h), p.scale);
        sim.write(Region::Gmem, TensorClass::S, n * n, None);

        // P = softmax(S)
        sim.read(Region::Gmem, TensorClass::S, n * n, None);
        let (mut prob, sum) = standard_softmax(&s);
        for (r, &z) in sum.iter().enumerate() {
            for x in prob.row_mut(r) {
                *x /= z;
            }
        }
        sim.write(Region::Gmem, TensorClass::P, n * n, None);

        // O = P V
        sim.read(Region::Gmem, TensorClass::P, n * n, None);
        sim.read(Region::Gmem, TensorClass::V, n * d, None);
        let v = p.v.head(b, h);
        let o = Matrix::from_fn(n, d, |r, c| {
            prob.row(r)
                .iter()
                .enumerate()
                .fold(0.0f32, |acc, (j, &pj)| acc + pj * v.get(j, c))
        });
        sim.write(Region::Gmem, TensorClass::O, n * d, None);
        out.set_head(b, h, &o);
    }
    let report = sim.into_report(format!("standard N={n} d={d}"), p.flops());
    (out, report)
}

/// The fused engine, heads in sequence, with every tile movement recorded.
///
/// Q, K and V tiles are staged through shared memory; `S`, `P` and the
/// output accumulator live in registers.
pub fn run_fmha_traced(
    p: &AttentionProblem,
    tile: TileConfig,
    prec: Precision,
    config: &SimConfig,
) -> Result<(Tensor4, RunReport), MemError> {
    let [_, n, _, d] = p.dims();
    tile.validate(n, d)?;
    let mut sim = MemSim::new(config.clone());
    sim.alloc_smem("sQ", tile.bm * d * sim.elem(TensorClass::Q))?;
    sim.alloc_smem("sK", tile.bn * d * sim.elem(TensorClass::K))?;
    sim.alloc_smem("sV", tile.bn * d * sim.elem(TensorClass::V))?;

    let (bm, bn) = (tile.bm, tile.bn);
    let mut out = Tensor4::zeros(p.dims());
    for (b, h) in p.heads() {
        sim.set_head((b, h));
        let mut obs = |ev: FmhaEvent| match ev {
            FmhaEvent::LoadQ { q_tile } => sim.copy(
                Region::Gmem,
                Region::Smem,
                TensorClass::Q,
                bm * d,
                (q_tile, None),
            ),
            FmhaEvent::LoadK { q_tile, k_tile } => sim.copy(
                Region::Gmem,
                Region::Smem,
                TensorClass::K,
                bn * d,
                (q_tile, Some(k_tile)),
            ),
            FmhaEvent::GemmI { q_tile, k_tile } => {
                let t = Some((q_tile, Some(k_tile)));
                sim.read(Region::Smem, TensorClass::Q, bm * d, t);
                sim.read(Region::Smem, TensorClass::K, bn * d, t);
                sim.write(Region::Rmem, TensorClass::S, bm * bn, t);
            }
            FmhaEvent::Softmax { q_tile, k_tile } => {
                let t = Some((q_tile, Some(k_tile)));
                sim.read(Region::Rmem, TensorClass::S, bm * bn, t);
                sim.write(Region::Rmem, TensorClass::P, bm * bn, t);
            }
            FmhaEvent::LoadV { q_tile, k_tile } => sim.copy(
                Region::Gmem,
                Region::Smem,
                TensorClass::V,
                bn * d,
                (q_tile, Some(k_tile)),
            ),
            FmhaEvent::GemmII { q_tile, k_tile } => {
                let t = Some((q_tile, Some(k_tile)));
                sim.read(Region::Rmem, TensorClass::P, bm * bn, t);
                sim.read(Region::Smem, TensorClass::V, bn * d, t);
                sim.read(Region::Rmem, TensorClass::OAcc, bm * d, t);
                sim.write(Region::Rmem, TensorClass::OAcc, bm * d, t);
            }
            FmhaEvent::StoreO { q_tile } => {
                sim.read(
                    Region::Rmem,
                    TensorClass::OAcc,
                    bm * d,
                    Some((q_tile, None)),
                );
                sim.write(Region::Gmem, TensorClass::O, bm * d, Some((q_tile, None)));
            }
        };
        let head = fmha_head(
            &p.q.head(b, h),
            &p.k.head(b, h),
            &p.v.head(b, h),
            p.scale,
            tile,
            prec,
            &mut obs,
        )?;
        out.set_head(b, h, &head.o);
    }
    let report = sim.into_report(
        format!("fmha N={n} d={d} bM={bm} bN={bn} {prec}"),
        p.flops(),
    );
    Ok((out, report))
}
