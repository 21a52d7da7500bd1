use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use vrrw_bench::{fresh_run, table};
use vrrw_core::coupling::paired_simulate;
use vrrw_core::walks::enumerate_exact;
use vrrw_core::{HatParams, LedgerState, OperatorConfig, Operators, WalkKind};

const STEPS: u64 = 100_000;

fn step_throughput(c: &mut Criterion) {
    let t = table("polylog:0.6", STEPS as usize + 2);
    let ops = Operators::new(t.spec(), OperatorConfig::default()).unwrap();
    let hat = WalkKind::Hat(HatParams::build(&ops, None).unwrap());
    let kinds = [
        WalkKind::Vrrw,
        WalkKind::Reflected,
        WalkKind::Tilde,
        hat,
        WalkKind::Breve { gamma: 0.25 },
        WalkKind::Restricted { lo: 0, hi: 4 },
    ];
    let mut g = c.benchmark_group("steps");
    g.throughput(Throughput::Elements(STEPS));
    g.sample_size(20);
    for k in &kinds {
        g.bench_with_input(BenchmarkId::from_parameter(k), k, |b, k| {
            b.iter(|| {
                let mut r = fresh_run(k, &t, 7);
                r.run(STEPS).unwrap();
                black_box(r.position())
            })
        });
    }
    g.finish();
}

fn coupling(c: &mut Criterion) {
    let t = table("linear:1", 10_002);
    let mut g = c.benchmark_group("coupling");
    g.sample_size(20);
    g.bench_function("tilde_reflected_1e4", |b| {
        b.iter(|| {
            let rec = paired_simulate(
                &WalkKind::Tilde,
                &WalkKind::Reflected,
                &t,
                &LedgerState::trivial(),
                3,
                10_000,
                8,
            )
            .unwrap();
            black_box(rec.compared)
        })
    });
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let t = table("linear:1", 64);
    let mut g = c.benchmark_group("enumerate");
    for n in [6u32, 10] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                black_box(
                    enumerate_exact(&WalkKind::Vrrw, &t, &LedgerState::trivial(), n)
                        .unwrap()
                        .len(),
                )
            })
        });
    }
    g.finish();
}

criterion_group!(benches, step_throughput, coupling, enumeration);
criterion_main!(benches);
