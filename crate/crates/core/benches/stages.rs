//! Single-thread versus full-pool timings for the data-parallel stages.
//! Both arms build a pool per iteration so the overhead is shared.

use std::hint::black_box;
use std::thread::available_parallelism;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use d4d_core::encoding::{fuse, ModelWeights, WeightDims};
use d4d_core::lifting::{instance_embedding_table, lift_sequence, EncoderHandle, LiftOptions};
use d4d_core::octree::{build_and_aggregate, OctreeConfig};
use d4d_core::par;
use d4d_core::qa::{emit_dataset, QaConfig, WindowSpec};
use d4d_core::sim::{ground_truth, simulate, SimConfig};

fn arms() -> [(&'static str, usize); 2] {
    let n = available_parallelism().map(|n| n.get()).unwrap_or(1);
    [("sequential", 1), ("parallel", n)]
}

fn stages(c: &mut Criterion) {
    let cfg = SimConfig::demo();
    let sim = simulate(&cfg).expect("simulate");
    let enc = EncoderHandle::mock(64, 7);
    let table = instance_embedding_table(&sim.sequence.instance_ids(), 8, 7).expect("table");
    let points = lift_sequence(&sim.sequence, &enc, &table, LiftOptions::default()).expect("lift");
    let octree = OctreeConfig::default();
    let grid = build_and_aggregate(&points, &octree).expect("octree");
    let voxels: Vec<_> = grid.records().iter().take(1024).cloned().collect();
    let weights = ModelWeights::init(7, WeightDims::new(64, 8, 8).expect("dims")).expect("weights");
    let gt = ground_truth(&cfg).expect("ground truth");
    let qa = QaConfig::default();
    let windows = WindowSpec::tile(cfg.duration, qa.window, qa.stride).expect("windows");

    let mut g = c.benchmark_group("stages");
    g.sample_size(10);
    for (arm, threads) in arms() {
        g.bench_function(BenchmarkId::new("lift", arm), |b| {
            b.iter(|| par::with_threads(threads, || lift_sequence(&sim.sequence, &enc, &table, LiftOptions::default()).unwrap()))
        });
        g.bench_function(BenchmarkId::new("octree", arm), |b| {
            b.iter(|| par::with_threads(threads, || build_and_aggregate(black_box(&points), &octree).unwrap()))
        });
        g.bench_function(BenchmarkId::new("fuse", arm), |b| {
            b.iter(|| par::with_threads(threads, || fuse(black_box(&voxels), &weights.fusion, 0.5).unwrap()))
        });
        g.bench_function(BenchmarkId::new("qagen", arm), |b| {
            b.iter(|| par::with_threads(threads, || emit_dataset(black_box(&gt), &windows, &qa, None).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
