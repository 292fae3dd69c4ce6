use std::hint::black_box;

use agent_factory_bench::reference_experiment;
use agent_factory_core::evolution::FitnessFunction;
use agent_factory_core::feature_model::{
    enumerate, expert_configuration, smart_light_model, validate,
};
use agent_factory_core::neurogenome::{Activation, NetworkSpec};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn forward(c: &mut Criterion) {
    let spec = NetworkSpec::new(4, 5, 3, Activation::Sigmoid).unwrap();
    let genome = spec.prune(&spec.random_genome(&mut ChaCha8Rng::seed_from_u64(1)));
    let (mut hidden, mut out) = (vec![0.0; 5], vec![0.0; 3]);
    c.bench_function("forward 4-5-3", |b| {
        b.iter(|| {
            spec.forward_into(
                &genome,
                black_box(&[0.3, 1.0, 0.5, 1.0]),
                &mut hidden,
                &mut out,
            )
            .unwrap();
            black_box(out[2])
        })
    });
}

fn episode(c: &mut Criterion) {
    let e = reference_experiment(1);
    let fitness = e.fitness().unwrap();
    let genome = e.spec().random_genome(&mut ChaCha8Rng::seed_from_u64(2));
    c.bench_function("reference episode", |b| {
        b.iter(|| fitness.evaluate(black_box(&genome)).unwrap())
    });
}

fn feature_model(c: &mut Criterion) {
    let model = smart_light_model();
    let config = expert_configuration();
    c.bench_function("validate expert configuration", |b| {
        b.iter(|| validate(&model, black_box(&config)).is_ok())
    });
    c.bench_function("enumerate built-in model", |b| {
        b.iter(|| enumerate(&model, 1 << 16).unwrap().len())
    });
}

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolution");
    group.sample_size(10);
    group.bench_function("reference generation", |b| {
        b.iter_batched(
            || reference_experiment(3),
            |mut e| {
                e.train_generation().unwrap();
                e
            },
            criterion::BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, forward, episode, feature_model, generation);
criterion_main!(benches);
