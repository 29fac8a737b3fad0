use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use g4d_core::fixtures::random_cloud;
use g4d_core::render::{render, render_reference};
use g4d_core::{Camera, Intrinsics, RenderConfig};

fn camera(size: usize) -> Camera {
    let c = (size as f64 - 1.0) / 2.0;
    Camera::reference(Intrinsics {
        fx: size as f64,
        fy: size as f64,
        cx: c,
        cy: c,
    })
    .unwrap()
}

fn mode() -> &'static str {
    if g4d_core::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

fn tiled(c: &mut Criterion) {
    let mut group = c.benchmark_group("render_tiled");
    group.sample_size(10);
    for (n, size) in [(10_000, 256), (100_000, 518)] {
        let cloud = random_cloud(12, n);
        let (cam, cfg) = (camera(size), RenderConfig::new(size, size));
        group.bench_with_input(BenchmarkId::new(mode(), n), &n, |b, _| {
            b.iter(|| render(&cloud, &cam, &cfg).unwrap())
        });
        // Same build pinned to one worker.
        if !g4d_core::is_parallel() {
            continue;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_with_input(BenchmarkId::new("one-thread", n), &n, |b, _| {
            b.iter(|| pool.install(|| render(&cloud, &cam, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn reference(c: &mut Criterion) {
    let mut group = c.benchmark_group("render_reference");
    group.sample_size(10);
    let cloud = random_cloud(12, 2_000);
    let (cam, cfg) = (camera(128), RenderConfig::new(128, 128));
    group.bench_function(mode(), |b| {
        b.iter(|| render_reference(&cloud, &cam, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tiled, reference);
criterion_main!(benches);
