use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sgnet_bench::{radial_model, random_frames};
use sgnet_core::graph::{build_knn, build_mst};
use sgnet_core::training::{loss_and_grad, one_hot, ResetGradient};
use sgnet_core::{SpikeMode, TaxelLayout};

fn graphs(c: &mut Criterion) {
    let layout = TaxelLayout::radial_example();
    let mut group = c.benchmark_group("graph");
    for sigma in [0.0, 2.5] {
        group.bench_with_input(BenchmarkId::new("mst", sigma), &sigma, |b, &s| {
            b.iter(|| build_mst(&layout, s))
        });
    }
    group.bench_function("knn/4", |b| b.iter(|| build_knn(&layout, 4)));
    group.finish();
}

fn tagconv(c: &mut Criterion) {
    let model = radial_model(0);
    let sgnet_core::network::FeatureParams::TagConv(params) = &model.params().feature else {
        unreachable!("default network uses TAGConv")
    };
    let frames = random_frames(1, 39, 2, 0.2, 1);
    let x = frames.index_axis(ndarray::Axis(0), 0);
    c.bench_function("tagconv/39x2->64", |b| b.iter(|| params.forward(x, model.graph().adjacency_powers())));
}

fn network(c: &mut Criterion) {
    let model = radial_model(0);
    let y = one_hot(3, 36);
    let mut group = c.benchmark_group("network");
    group.sample_size(20);
    for steps in [50, 325] {
        let frames = random_frames(steps, 39, 2, 0.1, 2);
        group.bench_with_input(BenchmarkId::new("forward", steps), &frames, |b, f| {
            b.iter(|| model.forward_frames(f.view(), SpikeMode::Hard))
        });
        group.bench_with_input(BenchmarkId::new("forward_backward", steps), &frames, |b, f| {
            b.iter(|| loss_and_grad(&model, f.view(), &y, SpikeMode::Hard, ResetGradient::Detached))
        });
    }
    group.finish();
}

criterion_group!(benches, graphs, tagconv, network);
criterion_main!(benches);
