use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use senbd::{simulate, Family, ModelSpec, Shape, Simulator};

fn single_line_spec() -> ModelSpec {
    ModelSpec::single_se_nbd(1.0, 0.5, 4.0, 0.5).unwrap()
}

fn network_spec() -> ModelSpec {
    ModelSpec::from_reproduction(
        Family::MdSeNbd,
        vec![0.5, 0.4, 0.6],
        vec![Shape::Finite(0.5), Shape::Finite(0.8), Shape::Finite(1.2)],
        vec![
            vec![0.30, 0.20, 0.00],
            vec![0.10, 0.25, 0.15],
            vec![0.00, 0.20, 0.30],
        ],
        vec![0.4, 0.5, 0.3],
    )
    .unwrap()
}

fn bench_step(c: &mut Criterion) {
    c.bench_function("step/single_line", |b| {
        let mut sim = Simulator::new(single_line_spec(), 1);
        b.iter(|| black_box(sim.step().unwrap()));
    });
    c.bench_function("step/three_lines", |b| {
        let mut sim = Simulator::new(network_spec(), 1);
        b.iter(|| black_box(sim.step().unwrap()));
    });
}

fn bench_simulate(c: &mut Criterion) {
    c.bench_function("simulate/single_line_10k", |b| {
        let spec = single_line_spec();
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            black_box(simulate(&spec, 10_000, seed).unwrap())
        });
    });
}

criterion_group!(benches, bench_step, bench_simulate);
criterion_main!(benches);
