use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use scenegraph_bench::{clips, scene_graphs};
use scenegraph_core::autodiff::Tape;
use scenegraph_core::bev::fit_homography;
use scenegraph_core::extraction::{extract_graph, extract_sequence, load_scenegraph_dataset};
use scenegraph_core::models::Vocab;
use scenegraph_core::tasks::{train_model, TrainRun};
use scenegraph_core::{ExtractionConfig, Model, ModelConfig};

fn extraction(c: &mut Criterion) {
    let data = clips(1, 20);
    let cfg = ExtractionConfig::default();
    let clip = &data.clips[0];
    c.bench_function("extract_graph", |b| {
        b.iter(|| extract_graph(black_box(&clip.frames[10]), &cfg, None).unwrap())
    });
    c.bench_function("extract_sequence_20", |b| {
        b.iter(|| extract_sequence(black_box(clip), &cfg, None).unwrap())
    });
}

fn homography(c: &mut Criterion) {
    let image = [[120.0, 700.0], [1160.0, 700.0], [760.0, 400.0], [520.0, 400.0]];
    let ground = [[0.0, 120.0], [36.0, 120.0], [36.0, 0.0], [0.0, 0.0]];
    c.bench_function("fit_homography", |b| {
        b.iter(|| fit_homography(black_box(&image), black_box(&ground)).unwrap())
    });
}

fn model(c: &mut Criterion) {
    let data = scene_graphs(1, 20);
    let model = Model::new(ModelConfig::default(), Vocab::from_config(&data.config)).unwrap();
    let inputs = model.prepare(&data.clips[0].graphs).unwrap();
    c.bench_function("seq_forward_20", |b| {
        b.iter(|| model.seq_forward_inputs(black_box(&inputs)).unwrap())
    });
    c.bench_function("seq_backward_20", |b| {
        b.iter(|| {
            let mut tape = Tape::with_params(&model.store);
            let tr = model.seq_trace(&mut tape, &inputs, None).unwrap();
            let loss = tape.cross_entropy(tr.logits, &[1], [1.0, 1.0]).unwrap();
            tape.backward(loss).unwrap()
        })
    });
}

fn training(c: &mut Criterion) {
    let data = scene_graphs(8, 20);
    let run = TrainRun {
        epochs: 1,
        ..TrainRun::default()
    };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("epoch_8_clips", |b| {
        b.iter(|| train_model(black_box(&data), &run, None).unwrap())
    });
    group.finish();
}

fn io(c: &mut Criterion) {
    let data = scene_graphs(20, 20);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.sgd.jsonl");
    scenegraph_core::extraction::save_scenegraph_dataset(&data, &path).unwrap();
    c.bench_function("load_scenegraph_dataset_20", |b| {
        b.iter_batched(|| path.clone(), |p| load_scenegraph_dataset(&p).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, extraction, homography, model, training, io);
criterion_main!(benches);
