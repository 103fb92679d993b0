use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gsx_bench::{crazy, twisted};
use gsx_core::experiment::{defect_profile, mean_fidelity, phase_average, susceptibility_first_order};
use gsx_core::{NoiseKind, NoiseModel, PhaseDistribution};

fn monte_carlo(c: &mut Criterion) {
    let proto = crazy(4);
    let model = NoiseModel::UncorrelatedEdge { p: 0.05 };
    c.bench_function("mean_fidelity/crazy4/10k", |b| {
        b.iter(|| black_box(mean_fidelity(&proto, &model, 10_000, 3).unwrap()))
    });
}

fn exact(c: &mut Criterion) {
    let proto = crazy(3);
    c.bench_function("defect_profile/crazy3/edge_loss", |b| {
        b.iter(|| black_box(defect_profile(&proto, NoiseKind::EdgeLoss, usize::MAX).unwrap()))
    });
    let proto = crazy(6);
    c.bench_function("first_order/crazy6/edge_loss", |b| {
        b.iter(|| black_box(susceptibility_first_order(&proto, NoiseKind::EdgeLoss).unwrap()))
    });
}

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("phase_average");
    group.sample_size(10);
    let proto = twisted(3);
    let dist = PhaseDistribution::gaussian(0.1);
    group.bench_function("twisted3/41_nodes", |b| b.iter(|| black_box(phase_average(&proto, &dist).unwrap())));
    group.finish();
}

criterion_group!(benches, monte_carlo, exact, quadrature);
criterion_main!(benches);
