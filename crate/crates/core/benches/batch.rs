use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rtm3d::geometry::{CameraModel, KeypointSet};
use rtm3d::par;
use rtm3d::solver::{solve_batch, solve_batch_seq, EnergyWeights, Priors, SolverConfig};
use rtm3d::synth::{apply_noise, generate_scene, generate_scenes, NoiseSpec, SceneSpec};

fn batch(n_scenes: usize) -> Vec<(KeypointSet, Priors)> {
    let cam = CameraModel::kitti_p2();
    (0..n_scenes)
        .flat_map(|i| {
            let spec = SceneSpec { seed: i as u64, ..SceneSpec::default() };
            let scene = apply_noise(&generate_scene(&spec, &cam), &NoiseSpec::pixels(1.0), i as u64);
            scene.objects.into_iter().filter(|o| o.usable).map(|o| (o.kps, o.priors)).collect::<Vec<_>>()
        })
        .collect()
}

fn solve_benches(c: &mut Criterion) {
    let cam = CameraModel::kitti_p2();
    let (w, cfg) = (EnergyWeights::default(), SolverConfig::default());
    let mut g = c.benchmark_group("solve_batch");
    for scenes in [8, 64] {
        let items = batch(scenes);
        g.bench_with_input(BenchmarkId::new("sequential", items.len()), &items, |b, items| {
            b.iter(|| solve_batch_seq(black_box(items), &cam, &w, &cfg))
        });
        if par::is_parallel() {
            g.bench_with_input(BenchmarkId::new("parallel", items.len()), &items, |b, items| {
                b.iter(|| solve_batch(black_box(items), &cam, &w, &cfg))
            });
        }
    }
    g.finish();

    let items = batch(1);
    c.bench_function("solve_single_object", |b| {
        b.iter(|| solve_batch_seq(black_box(&items[..1]), &cam, &w, &cfg))
    });
}

fn synth_benches(c: &mut Criterion) {
    let cam = CameraModel::kitti_p2();
    let spec = SceneSpec::default();
    let mut g = c.benchmark_group("generate_scenes");
    g.bench_function("sequential", |b| {
        b.iter(|| (0..32).map(|i| generate_scene(&SceneSpec { seed: i, ..spec }, &cam)).collect::<Vec<_>>())
    });
    if par::is_parallel() {
        g.bench_function("parallel", |b| b.iter(|| generate_scenes(black_box(&spec), &cam, 32)));
    }
    g.finish();
}

criterion_group!(benches, solve_benches, synth_benches);
criterion_main!(benches);
