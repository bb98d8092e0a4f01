use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use snaketext::dataio::SynthKind;
use snaketext::tsr::compare::{run_fps_path, run_nms_path};
use snaketext::tsr::shape_text;
use snaketext::ShapingConfig;
use snaketext_bench::{candidates, synthetic_maps, CANDIDATE_SWEEP};

fn fps_vs_nms(c: &mut Criterion) {
    let cfg = ShapingConfig::default();
    let mut group = c.benchmark_group("postprocess");
    group.sample_size(20);
    for k in CANDIDATE_SWEEP {
        let set = candidates(k);
        group.bench_with_input(BenchmarkId::new("fps_path", k), &set, |b, s| {
            b.iter(|| run_fps_path(black_box(s), &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("nms_path", k), &set, |b, s| {
            b.iter(|| run_nms_path(black_box(s), &cfg, 0.5).unwrap())
        });
    }
    group.finish();
}

fn shaping(c: &mut Criterion) {
    let cfg = ShapingConfig::default();
    let mut group = c.benchmark_group("shape_text");
    for (name, kind) in [
        ("straight", SynthKind::Straight),
        ("sinusoid", SynthKind::Sinusoid),
        ("two_band", SynthKind::TwoBand),
    ] {
        let maps = synthetic_maps(kind, 1);
        group.bench_function(name, |b| {
            b.iter(|| shape_text(black_box(&maps), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fps_vs_nms, shaping);
criterion_main!(benches);
