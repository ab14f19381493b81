use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use forge_bench::{holes, photo, scene, training_sample};
use forge_core::diffusion::{sample, train_step, DenoiserInput, DenoiserNet, NoiseSchedule, SampleConfig, TrainConfig};
use forge_core::geom::{integrate_normals, triangulate_depth_grid, IntegrationConfig};
use forge_core::inpaint::inpaint_fast_marching;
use forge_core::nn::Adam;
use forge_core::rng::seeded;
use forge_core::sketch::{extract_sketch, ExtractConfig};

fn extraction(c: &mut Criterion) {
    let s = scene(1, 64);
    let mut g = c.benchmark_group("extract_sketch");
    for scale in [2, 4] {
        let img = photo(&s, scale);
        g.bench_with_input(BenchmarkId::from_parameter(64 * scale), &img, |b, img| {
            b.iter(|| extract_sketch(black_box(img), &ExtractConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn inpainting(c: &mut Criterion) {
    let s = scene(2, 64);
    let m = holes(&s, 3);
    c.bench_function("inpaint_fast_marching/64", |b| {
        b.iter(|| inpaint_fast_marching(black_box(&s.sketch), &m, 3).unwrap())
    });
}

fn denoiser(c: &mut Criterion) {
    let s = scene(3, 32);
    let sample_32 = training_sample(&s);
    let net = DenoiserNet::<f32>::init(0);
    let x = vec![0.1f32; 4 * 32 * 32];
    c.bench_function("denoiser_forward/32", |b| {
        b.iter(|| {
            net.forward(&DenoiserInput {
                x_t: black_box(&x),
                sketch: sample_32.sketch.data(),
                t: 100,
                tag: 1,
                size: 32,
            })
            .unwrap()
        })
    });

    let cfg = TrainConfig::default();
    let sched = NoiseSchedule::default();
    let samples = vec![&sample_32; cfg.batch_size];
    let mut train_net = DenoiserNet::<f32>::init(0);
    let mut opt = Adam::new(cfg.adam(), train_net.param_count());
    let mut r = seeded(0);
    c.bench_function("train_step/32x4", |b| {
        b.iter(|| train_step(&mut train_net, &mut opt, &samples, &cfg, &sched, &mut r).unwrap())
    });

    let short = NoiseSchedule::linear(20, 1e-4, 0.2).unwrap();
    let sc = SampleConfig { n_samples: 1, ..Default::default() };
    c.bench_function("sample/32x20steps", |b| {
        b.iter(|| sample(&net, black_box(&sample_32.sketch), &sc, &short, |_, _| {}).unwrap())
    });
}

fn geometry(c: &mut Criterion) {
    let s = scene(4, 64);
    c.bench_function("integrate_normals/64", |b| {
        b.iter(|| integrate_normals(&s.normals, black_box(&s.depth), &IntegrationConfig::default(), &s.k).unwrap())
    });
    c.bench_function("triangulate_depth_grid/64", |b| {
        b.iter(|| triangulate_depth_grid(black_box(&s.depth), &s.k, 0.1))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = extraction, inpainting, denoiser, geometry
}
criterion_main!(benches);
