use criterion::{criterion_group, criterion_main, Criterion};
use regstop_core::simulator::{estimate_value, simulate_path};
use regstop_core::{Mode, ModelParams, Regime, SimConfig, ViSolution};
use std::hint::black_box;

fn simulation(c: &mut Criterion) {
    let model = ModelParams::reference_example()
        .validate(Mode::Strict)
        .unwrap();
    let xstar = ViSolution::solve(&model).unwrap().xstar;
    let config = SimConfig::new(Regime::One, 1.0, xstar);

    c.bench_function("single_path", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            simulate_path(&model, config, black_box(i)).unwrap()
        })
    });

    let mut group = c.benchmark_group("estimate");
    group.sample_size(10);
    group.bench_function("10k_paths", |b| {
        b.iter(|| estimate_value(&model, black_box(config.with_paths(10_000))).unwrap())
    });
    group.finish();
}

criterion_group!(benches, simulation);
criterion_main!(benches);
