use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use tgrasp_bench::{grasp_controls, grasped_state, random_deltas, random_vec, rng};
use tgrasp_core::mappo::compute_gae;
use tgrasp_core::nn::{Mlp, Tensor2};
use tgrasp_core::physics::{world_step, WorldConfig};
use tgrasp_core::sensing::ternarize;

fn physics(c: &mut Criterion) {
    let config = WorldConfig::default();
    let state = grasped_state(&config);
    let controls = grasp_controls(&state, &config);
    c.bench_function("world_step_grasped", |b| {
        b.iter(|| world_step(black_box(&state), black_box(&controls), &config).unwrap())
    });
}

fn networks(c: &mut Criterion) {
    let net = Mlp::new(&[18, 64, 64, 4], 1.0, &mut rng(2)).unwrap();
    let single = Tensor2::new(1, 18, random_vec(18, 3)).unwrap();
    let batch = Tensor2::new(512, 18, random_vec(512 * 18, 4)).unwrap();
    let grad = Tensor2::new(512, 4, random_vec(512 * 4, 5)).unwrap();
    c.bench_function("mlp_forward_1x18", |b| b.iter(|| net.forward(black_box(&single)).unwrap()));
    c.bench_function("mlp_forward_512x18", |b| b.iter(|| net.forward(black_box(&batch)).unwrap()));
    c.bench_function("mlp_backward_512x18", |b| {
        b.iter_batched(
            || net.forward(&batch).unwrap().1,
            |cache| net.backward(&cache, black_box(&grad)).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn advantages(c: &mut Criterion) {
    let n = 4096;
    let rewards = random_vec(n, 6);
    let values = random_vec(n, 7);
    let dones: Vec<bool> = (0..n).map(|i| i % 200 == 199).collect();
    c.bench_function("gae_4096", |b| {
        b.iter(|| compute_gae(black_box(&rewards), &values, &dones, 0.3, 0.99, 0.95).unwrap())
    });
}

fn sensing(c: &mut Criterion) {
    let deltas = random_deltas(1024, 8);
    c.bench_function("ternarize_1024", |b| {
        b.iter(|| {
            for d in &deltas {
                black_box(ternarize(black_box(d), 0.01));
            }
        })
    });
}

criterion_group!(benches, physics, networks, advantages, sensing);
criterion_main!(benches);
