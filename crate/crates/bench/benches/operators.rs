use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vrrw_core::{index_limits, Operand, OperatorConfig, Operators, WeightSpec};

fn build(c: &mut Criterion) {
    let spec = WeightSpec::polylog(0.6).unwrap();
    let mut g = c.benchmark_group("operators");
    g.sample_size(10);
    g.bench_function("new_polylog", |b| {
        b.iter(|| black_box(Operators::new(&spec, OperatorConfig::default()).unwrap()))
    });
    let ops = Operators::new(&spec, OperatorConfig::default()).unwrap();
    g.bench_function("apply_g_identity", |b| {
        b.iter(|| black_box(ops.apply_g(Operand::Scaled(1.0)).unwrap()))
    });
    g.bench_function("apply_h_half", |b| {
        b.iter(|| black_box(ops.apply_h(Operand::Scaled(0.5)).unwrap()))
    });
    g.bench_function("g_iteration_half", |b| {
        b.iter(|| black_box(ops.g_iteration(0.5).unwrap().index))
    });
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("index");
    g.sample_size(10);
    for w in ["linear:1", "polylog:0.6"] {
        let spec: WeightSpec = w.parse().unwrap();
        let ops = Operators::new(&spec, OperatorConfig::default()).unwrap();
        g.bench_function(w, |b| {
            b.iter(|| black_box(index_limits(&ops, 0.05, 5).unwrap().i_plus))
        });
    }
    g.finish();
}

criterion_group!(benches, build, sweep);
criterion_main!(benches);
