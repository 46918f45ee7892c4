use std::collections::BTreeSet;

use scenegraph_core::extraction::extract_dataset;
use scenegraph_core::models::{ModelConfig, PoolKind, TaskKind, TemporalKind};
use scenegraph_core::synth::{generate, SynthConfig};
use scenegraph_core::tasks::{
    cross_validate, explain, predict, read_attention_csv, train_model, transfer_evaluate,
    transfer_split, write_attention_csv, TrainRun,
};
use scenegraph_core::{Error, ExtractionConfig, SceneGraphDataset};

fn corpus(clips: usize, frames: usize, seed: u64) -> SceneGraphDataset {
    let cfg = SynthConfig {
        clips,
        frames,
        ..SynthConfig::default()
    };
    extract_dataset(&generate(&cfg, seed).unwrap(), &ExtractionConfig::default(), None)
        .unwrap()
        .0
}

fn small_run(epochs: usize) -> TrainRun {
    TrainRun {
        model: ModelConfig {
            layer_sizes: vec![16, 16],
            lstm_hidden: 16,
            mlp_sizes: vec![8],
            ..ModelConfig::default()
        },
        epochs,
        learning_rate: 5e-3,
        seed: 3,
        ..TrainRun::default()
    }
}

#[test]
fn zero_learning_rate_keeps_initial_weights() {
    let data = corpus(8, 6, 1);
    let run = TrainRun {
        learning_rate: 0.0,
        ..small_run(2)
    };
    let a = train_model(&data, &run, None).unwrap();
    let b = train_model(&data, &TrainRun { epochs: 1, ..run.clone() }, None).unwrap();
    assert_eq!(a.model.store, b.model.store);
}

#[test]
fn training_is_deterministic() {
    let data = corpus(10, 6, 2);
    let run = small_run(3);
    let a = train_model(&data, &run, None).unwrap();
    let b = train_model(&data, &run, None).unwrap();
    assert_eq!(a.loss_trace(), b.loss_trace());
    assert_eq!(
        a.model.checkpoint().unwrap().to_json().unwrap(),
        b.model.checkpoint().unwrap().to_json().unwrap()
    );
}

#[test]
fn loss_settles_on_separable_data() {
    let data = corpus(30, 8, 4);
    let trace = train_model(&data, &small_run(10), None).unwrap().loss_trace();
    for e in 4..trace.len() {
        assert!(trace[e] <= 1.1 * trace[e - 1] + 1e-3, "uptick at epoch {e}: {trace:?}");
    }
    assert!(trace[trace.len() - 1] < trace[0]);
}

#[test]
fn cv_folds_partition_the_clips() {
    let data = corpus(20, 5, 5);
    let report = cross_validate(&data, &small_run(1), 4, true).unwrap();
    let mut seen = BTreeSet::new();
    for f in &report.folds {
        assert_eq!(f.epochs.len(), 1);
        assert!(f.epochs[0].test.is_some());
        for p in &f.predictions {
            assert!(seen.insert(p.clip_id.clone()), "{} tested twice", p.clip_id);
        }
    }
    assert_eq!(seen.len(), data.clips.len());
    assert!(matches!(
        cross_validate(&data, &small_run(1), 21, false),
        Err(Error::InvalidFoldCount { .. })
    ));
}

#[test]
fn per_frame_models_predict_every_frame() {
    let data = corpus(8, 7, 6);
    let mut run = small_run(1);
    run.model.task = TaskKind::PerFrame;
    let trained = train_model(&data, &run, None).unwrap();
    for p in predict(&trained.model, &data).unwrap() {
        assert_eq!(p.risk.len(), 7);
        assert_eq!(p.predictions.len(), 7);
    }
}

#[test]
fn self_transfer_on_the_held_out_split_is_identical() {
    let data = corpus(20, 5, 7);
    let run = small_run(2);
    let (_, test) = transfer_split(&data, 0.7, run.seed).unwrap();
    let (report, _) = transfer_evaluate(&data, &test, &run, 0.7).unwrap();
    assert_eq!(report.source, report.target);
    assert_eq!(report.delta, 0.0);

    let mut other = test.clone();
    other.config.relation_names.push("Touching".into());
    assert!(matches!(
        transfer_evaluate(&data, &other, &run, 0.7),
        Err(Error::VocabularyMismatch(_))
    ));
}

#[test]
fn attention_dump_round_trips_through_csv() {
    let data = corpus(6, 5, 8);
    let trained = train_model(&data, &small_run(1), None).unwrap();
    let dump = explain(&trained.model, &data).unwrap();
    assert!(dump.warnings.is_empty());
    for (_, beta) in &dump.betas {
        assert!((beta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let nodes: usize = data.clips.iter().flat_map(|c| &c.graphs).map(|g| g.nodes.len()).sum();
    assert_eq!(dump.rows.len(), nodes);
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("attention.csv");
    write_attention_csv(&path, &dump.rows).unwrap();
    assert_eq!(read_attention_csv(&path).unwrap(), dump.rows);
}

#[test]
fn explain_degrades_without_attention_sources() {
    let data = corpus(6, 4, 9);
    let mut run = small_run(1);
    run.model.pool = PoolKind::None;
    run.model.temporal = TemporalKind::LstmLast;
    let trained = train_model(&data, &run, None).unwrap();
    let dump = explain(&trained.model, &data).unwrap();
    assert_eq!(dump.warnings.len(), 2);
    assert!(dump.rows.iter().all(|r| r.alpha.is_none() && r.beta.is_none()));
    assert!(dump.betas.is_empty());
}
