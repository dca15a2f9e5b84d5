//! End-to-end pipeline benchmarks: fusion, evaluation, search, preprocessing.
//!
//! Run with `cargo bench -p fusedet-bench`. Sample counts are kept modest —
//! the goal is catching order-of-magnitude regressions, not microtuning.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use fusedet_bench::{detection_pool, gray_image, model_runs};
use fusedet_core::{
    clahe, evaluate, fuse_dataset, fuse_image, rescale, run_views, search, ClaheParams,
    FusionConfig, ModelRun, SearchCriterion, SearchOptions,
};

fn bench_fusion(c: &mut Criterion) {
    let config = FusionConfig::default();

    let runs = model_runs(5, 40);
    let views = run_views(&runs);
    c.bench_function("fuse_image/5x40_boxes", |b| {
        b.iter(|| fuse_image(black_box(&views), &config).unwrap())
    });

    let (pool, _) = detection_pool(3, 100, 6);
    let runs: Vec<ModelRun> = pool
        .iter()
        .map(|s| ModelRun {
            model_id: s.model_id.clone(),
            weight: 1.0,
            detections: s.detections.clone(),
        })
        .collect();
    let views = run_views(&runs);
    c.bench_function("fuse_dataset/3_models_100_images", |b| {
        b.iter(|| fuse_dataset(black_box(&views), &config, "ensemble").unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let (pool, gts) = detection_pool(1, 100, 6);
    let dets = &pool[0].detections;
    c.bench_function("evaluate/600_truths", |b| {
        b.iter(|| evaluate(black_box(dets), &gts, 0.5, 0.5).unwrap())
    });
}

fn bench_search(c: &mut Criterion) {
    let (pool, gts) = detection_pool(3, 20, 4);
    let options = SearchOptions {
        workers: 1,
        ..SearchOptions::default()
    };
    c.bench_function("search/n3_54_assignments_sequential", |b| {
        b.iter(|| {
            search(
                black_box(&pool),
                &gts,
                SearchCriterion::MaximizeAp50,
                &options,
            )
            .unwrap()
        })
    });
}

fn bench_preprocess(c: &mut Criterion) {
    let img = gray_image(800, 800, 9);
    let params = ClaheParams::default();
    c.bench_function("clahe/800x800_11x11", |b| {
        b.iter(|| clahe(black_box(&img), &params).unwrap())
    });

    let small = gray_image(512, 512, 10);
    c.bench_function("rescale/512_to_800", |b| {
        b.iter(|| rescale(black_box(&small), &[]).unwrap())
    });
}

fn config() -> Criterion {
    Criterion::default()
        .sample_size(20)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2))
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_fusion, bench_metrics, bench_search, bench_preprocess
}
criterion_main!(benches);
