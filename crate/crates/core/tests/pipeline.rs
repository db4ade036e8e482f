//! Library flow across modules: tensors on disk, the traced fused run under
//! the Hopper-like preset, error against dense attention, CSV report.

use std::fs::File;

use fmha_sim::attention::{
    max_rel_error, standard_attention, AttentionProblem, Precision, StoragePrecision, Tensor4,
    TileConfig,
};
use fmha_sim::memsim::{
    run_fmha_traced, smem_footprint, write_csv, MemError, Region, SimConfig, TensorClass,
};

fn preset() -> SimConfig {
    SimConfig::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/hopper.toml"
    ))
    .unwrap()
}

#[test]
fn round_trip_then_traced_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = AttentionProblem::gaussian(2, 128, 2, 64, 11).unwrap();
    let mut loaded = Vec::new();
    for (name, t) in [("q", &p.q), ("k", &p.k), ("v", &p.v)] {
        let path = dir.path().join(format!("{name}.fmht"));
        t.write_to(File::create(&path).unwrap(), StoragePrecision::F32)
            .unwrap();
        let (back, storage) = Tensor4::read_from(File::open(&path).unwrap()).unwrap();
        assert_eq!(storage, StoragePrecision::F32);
        assert_eq!(&back, t);
        loaded.push(back);
    }
    let v = loaded.pop().unwrap();
    let k = loaded.pop().unwrap();
    let q = loaded.pop().unwrap();
    let p2 = AttentionProblem::new(q, k, v).unwrap();

    let cfg = preset();
    let tile = TileConfig::new(128, 64, 64);
    let (o, report) = run_fmha_traced(&p2, tile, Precision::F32, &cfg).unwrap();
    let err = max_rel_error(&o, &standard_attention(&p));
    assert!(err.max_rel <= 1e-5, "{err:?}");

    assert!(report.smem_peak <= cfg.smem_capacity_bytes.unwrap());
    assert_eq!(report.smem_peak, smem_footprint(tile, &cfg));
    assert_eq!(report.counter(Region::Gmem, TensorClass::S).total(), 0);
    assert_eq!(report.flops, p.flops());

    let report = report.with_error(err.max_rel);
    let mut buf = Vec::new();
    write_csv(&report.rows(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().contains(",gmem,"));
}

#[test]
fn f16_storage_round_trip_matches_emulated_rounding() {
    let p = AttentionProblem::gaussian(1, 64, 1, 16, 3).unwrap();
    let mut buf = Vec::new();
    p.q.write_to(&mut buf, StoragePrecision::F16).unwrap();
    let (back, storage) = Tensor4::read_from(buf.as_slice()).unwrap();
    assert_eq!(storage, StoragePrecision::F16);
    for (a, b) in back.as_slice().iter().zip(p.q.as_slice()) {
        assert_eq!(*a, Precision::F16Emu.round(*b).0);
    }
}

#[test]
fn oversized_tiles_exceed_the_preset() {
    let p = AttentionProblem::gaussian(1, 128, 1, 512, 0).unwrap();
    let err = run_fmha_traced(
        &p,
        TileConfig::new(128, 128, 512),
        Precision::F32,
        &preset(),
    );
    assert!(matches!(err, Err(MemError::Capacity { .. })));
}
