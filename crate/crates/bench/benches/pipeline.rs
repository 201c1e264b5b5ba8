//! Hot-path benchmarks: embedding scoring, rotated-box geometry, cluster
//! growth, and the full per-scene pipeline.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use osd_bench::bench_scene;
use osd_core::clustering::{build_index, extract_region, grow_cluster};
use osd_core::geometry::iou_3d;
use osd_core::metric_head::Embedding;
use osd_core::{
    eds, min_oriented_box, run_mluc, Box7, ClusterConfig, PipelineConfig, Point3, Prototypes,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_eds(c: &mut Criterion) {
    let protos = Prototypes::new(vec!["car".into(), "cyclist".into(), "pedestrian".into()])
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let embeddings: Vec<Embedding> = (0..1024)
        .map(|_| (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect())
        .collect();
    c.bench_function("eds_1024_embeddings_c3", |b| {
        b.iter(|| {
            embeddings
                .iter()
                .map(|e| eds(black_box(e), &protos).unwrap())
                .sum::<f64>()
        })
    });
}

fn rand_box(rng: &mut ChaCha8Rng, spread: f64) -> Box7 {
    Box7::new(
        "b",
        rng.gen_range(-spread..spread),
        rng.gen_range(-spread..spread),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(0.5..2.5),
        rng.gen_range(0.5..2.5),
        rng.gen_range(0.8..2.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

fn bench_iou(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(Box7, Box7)> = (0..256)
        .map(|_| (rand_box(&mut rng, 1.0), rand_box(&mut rng, 1.0)))
        .collect();
    c.bench_function("iou_3d_256_rotated_pairs", |b| {
        b.iter(|| {
            pairs
                .iter()
                .map(|(x, y)| iou_3d(black_box(x), black_box(y)))
                .sum::<f64>()
        })
    });
}

fn bench_min_box(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<Point3> = (0..512)
        .map(|_| {
            Point3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..1.5),
            )
        })
        .collect();
    c.bench_function("min_oriented_box_512_points", |b| {
        b.iter(|| min_oriented_box(black_box(&pts), 0.1).unwrap())
    });
}

fn bench_grow(c: &mut Criterion) {
    let (_, sc) = bench_scene();
    let pts = &sc.scene.points;
    let ccfg = ClusterConfig::default();
    let index = build_index(pts, ccfg.neighbor_radius);
    // Seed inside the largest object so growth walks a full real cluster.
    let mut counts = std::collections::HashMap::new();
    for &obj in &sc.point_object {
        *counts.entry(obj).or_insert(0usize) += 1;
    }
    let biggest = *counts.iter().max_by_key(|(_, n)| **n).unwrap().0;
    let seed = sc.point_object.iter().position(|&o| o == biggest).unwrap();
    let region = extract_region(pts, &pts[seed], ccfg.region_radius).unwrap();
    let origin = Point3::new(0.0, 0.0, 0.0);
    c.bench_function("grow_cluster_largest_object", |b| {
        b.iter(|| grow_cluster(pts, &index, black_box(&region), &ccfg, &origin).unwrap())
    });
}

fn bench_run_mluc(c: &mut Criterion) {
    let (cfg, sc) = bench_scene();
    let dets: Vec<(Box7, Embedding)> = sc
        .detections
        .dets
        .iter()
        .map(|d| (d.bbox.clone(), d.embedding.clone()))
        .collect();
    let protos = Prototypes::new(cfg.known_classes()).unwrap();
    let pipe = PipelineConfig {
        lambda_eds: 30.0,
        ..PipelineConfig::default()
    };
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(20);
    group.bench_function("run_mluc_one_scene", |b| {
        b.iter(|| {
            run_mluc(
                black_box(&sc.scene.points),
                &dets,
                &protos,
                osd_core::HeadKind::Metric,
                &pipe,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_eds,
    bench_iou,
    bench_min_box,
    bench_grow,
    bench_run_mluc
);
criterion_main!(benches);
