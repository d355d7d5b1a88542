//! Micro-benchmarks of the simulator, perception and learning kernels.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use cura_core::dce::energy_distance_loss;
use cura_core::env::{EnvOptions, EpisodeConfig, PushEnv, RewardConfig};
use cura_core::geometry::ray_cast;
use cura_core::perception::{simulate_lidar, ConfidenceMap, MapEncoder, OcclusionMode};
use cura_core::{Mlp, OrientedRect, Pose2D, Vec2};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn episode_env(seed: u64) -> PushEnv {
    let mut env = PushEnv::new(
        EpisodeConfig::default(),
        RewardConfig::default(),
        EnvOptions::default(),
        Arc::new(MapEncoder::AveragePool),
    )
    .unwrap();
    env.reset(seed);
    env
}

fn geometry(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rects: Vec<OrientedRect> = (0..7)
        .map(|_| {
            OrientedRect::square(
                Pose2D::new(rng.random_range(1.0..8.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
                rng.random_range(0.4..1.0),
            )
        })
        .collect();
    c.bench_function("ray_cast_7_rects", |b| {
        let mut a = 0.0f64;
        b.iter(|| {
            a += 0.01;
            black_box(ray_cast(Vec2::new(0.0, 0.0), a, black_box(&rects), 8.0))
        })
    });
}

fn perception(c: &mut Criterion) {
    let env = episode_env(3);
    let world = env.world().clone();
    c.bench_function("lidar_180_beams", |b| {
        b.iter(|| black_box(simulate_lidar(black_box(&world), 180, 8.0, OcclusionMode::Realistic)))
    });
    let scan = simulate_lidar(&world, 180, 8.0, OcclusionMode::Realistic);
    let mut map = env.map().clone();
    c.bench_function("confidence_map_update", |b| b.iter(|| map.update(black_box(&scan), 0.9)));
    let _: &ConfidenceMap = &map;
}

fn networks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mlp = Mlp::new(&[56, 128, 128, 50], 1.0, &mut rng);
    let x: Vec<f64> = (0..56).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("mlp_forward_single", |b| b.iter(|| black_box(mlp.forward(black_box(&x)).unwrap())));
    let batch = Array2::from_shape_fn((256, 56), |_| rng.random_range(-1.0..1.0));
    let out_grad = Array2::from_elem((256, 50), 1e-3);
    let mut grads = vec![0.0; mlp.num_params()];
    c.bench_function("mlp_forward_backward_256", |b| {
        b.iter(|| {
            let (_, cache) = mlp.forward_batch(batch.view()).unwrap();
            black_box(mlp.backward(&cache, out_grad.view(), &mut grads).unwrap())
        })
    });
    let p: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..10.0)).collect();
    let q: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..10.0)).collect();
    c.bench_function("energy_distance_50", |b| {
        b.iter(|| black_box(energy_distance_loss(black_box(&p), black_box(&q)).unwrap()))
    });
}

fn environment(c: &mut Criterion) {
    let mut env = episode_env(5);
    let mut seed = 5;
    c.bench_function("env_step", |b| {
        b.iter(|| {
            if env.is_done() {
                seed += 1;
                env.reset(seed);
            }
            black_box(env.step(&[0.6, 0.0, 0.1, 0.0]).unwrap())
        })
    });
}

criterion_group!(benches, geometry, perception, networks, environment);
criterion_main!(benches);
