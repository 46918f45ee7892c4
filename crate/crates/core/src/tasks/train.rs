use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Scores;
use crate::autodiff::{OptimizerKind, Optimizer, Tape};
use crate::dataset::{class_weights, downsample_items};
use crate::error::{Error, Result};
use crate::extraction::{GraphClip, SceneGraphDataset};
use crate::models::{GraphInput, Model, ModelConfig, TaskKind, Vocab};
use crate::rng::{derive_seed, seeded_rng};

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const DOWNSAMPLE_STREAM: u64 = 3;

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRun {
    pub model: ModelConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Weight the loss by inverse class frequency.
    pub class_weights: bool,
    /// Train on a class-balanced subsample instead.
    pub downsample: bool,
}

impl Default for TrainRun {
    fn default() -> Self {
        TrainRun {
            model: ModelConfig::default(),
            epochs: 20,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            class_weights: false,
            downsample: false,
        }
    }
}

impl TrainRun {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.class_weights && self.downsample {
            return Err(Error::Config(
                "class_weights and downsample are mutually exclusive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean loss of one epoch and, when monitored, held-out scores after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<Scores>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub epochs: Vec<EpochRecord>,
}

impl Trained {
    pub fn loss_trace(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

pub(crate) fn binary_label(c: &GraphClip) -> Result<u8> {
    match c.label {
        Some(y @ (0 | 1)) => Ok(y),
        Some(y) => Err(Error::Label(y as i64)),
        None => Err(Error::LabelMissing(c.clip_id.clone())),
    }
}

/// Model inputs of every clip, converted once.
pub fn prepare_clips(model: &Model, clips: &[GraphClip]) -> Result<Vec<Vec<GraphInput>>> {
    clips.par_iter().map(|c| model.prepare(&c.graphs)).collect()
}

fn train_task(
    train: &SceneGraphDataset,
    run: &TrainRun,
    task: TaskKind,
    monitor: Option<&SceneGraphDataset>,
) -> Result<Trained> {
    run.validate()?;
    if run.model.task != task {
        return Err(Error::Config(format!(
            "model task {:?} does not match the requested training task {task:?}",
            run.model.task
        )));
    }
    if train.clips.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut config = run.model.clone();
    config.seed = derive_seed(run.seed, INIT_STREAM);
    let mut model = Model::new(config, Vocab::from_config(&train.config))?;

    let clips: Vec<GraphClip> = if run.downsample {
        downsample_items(&train.clips, derive_seed(run.seed, DOWNSAMPLE_STREAM))?
    } else {
        train.clips.clone()
    };
    let labels: Vec<u8> = clips.iter().map(binary_label).collect::<Result<_>>()?;
    let weights = if run.class_weights {
        let (w0, w1) = class_weights(&clips)?;
        [w0, w1]
    } else {
        [1.0, 1.0]
    };
    let inputs = prepare_clips(&model, &clips)?;
    for (c, x) in clips.iter().zip(&inputs) {
        if x.is_empty() {
            return Err(Error::Frame {
                clip: c.clip_id.clone(),
                frame_index: 0,
                source: Box::new(Error::EmptyClip),
            });
        }
    }
    let monitor_inputs = match monitor {
        Some(m) => Some((prepare_clips(&model, &m.clips)?, m)),
        None => None,
    };

    let mut optimizer = Optimizer::new(run.optimizer, run.learning_rate);
    let mut shuffle_rng = seeded_rng(derive_seed(run.seed, SHUFFLE_STREAM));
    let mut dropout_rng = seeded_rng(derive_seed(run.seed, DROPOUT_STREAM));
    let mut order: Vec<usize> = (0..clips.len()).collect();
    let mut epochs = Vec::with_capacity(run.epochs);
    for epoch in 0..run.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for &i in &order {
            let y = labels[i];
            let grads = {
                let mut tape = Tape::with_params(&model.store);
                let loss = match task {
                    TaskKind::Sequence => {
                        let tr = model.seq_trace(&mut tape, &inputs[i], Some(&mut dropout_rng))?;
                        tape.cross_entropy(tr.logits, &[y], weights)?
                    }
                    TaskKind::PerFrame => {
                        let tr = model.frame_trace(&mut tape, &inputs[i], Some(&mut dropout_rng))?;
                        tape.cross_entropy(tr.logits, &vec![y; inputs[i].len()], weights)?
                    }
                };
                total += tape.value(loss).data[0];
                tape.backward(loss)?
            };
            model.store.accumulate(grads.params());
            optimizer.step(&mut model.store)?;
        }
        let loss = total / clips.len() as f64;
        log::debug!("epoch {epoch}: loss {loss:.6}");
        let test = match &monitor_inputs {
            Some((x, m)) => Some(score_inputs(&model, x, &m.clips)?.0),
            None => None,
        };
        epochs.push(EpochRecord { epoch, loss, test });
    }
    Ok(Trained { model, epochs })
}

/// Trains a clip-level risk classifier, one optimizer step per clip.
pub fn train_sequence_classifier(train: &SceneGraphDataset, run: &TrainRun) -> Result<Trained> {
    train_task(train, run, TaskKind::Sequence, None)
}

/// Trains a per-frame collision predictor; every frame carries its clip label.
pub fn train_frame_classifier(train: &SceneGraphDataset, run: &TrainRun) -> Result<Trained> {
    train_task(train, run, TaskKind::PerFrame, None)
}

/// Trains for the task named in `run.model.task`, scoring `monitor` after
/// every epoch when given.
pub fn train_model(
    train: &SceneGraphDataset,
    run: &TrainRun,
    monitor: Option<&SceneGraphDataset>,
) -> Result<Trained> {
    train_task(train, run, run.model.task, monitor)
}

/// Risk probabilities and hard predictions for one clip: a single entry for
/// sequence models, one per frame for per-frame models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub label: Option<u8>,
    pub risk: Vec<f64>,
    pub predictions: Vec<u8>,
}

fn predict_inputs(model: &Model, inputs: &[Vec<GraphInput>], clips: &[GraphClip]) -> Result<Vec<ClipPrediction>> {
    inputs
        .par_iter()
        .zip(clips.par_iter())
        .map(|(x, c)| {
            let (risk, predictions) = if model.is_per_frame() {
                let out = model.frame_forward_inputs(x)?;
                (out.probs.iter().map(|p| p[1]).collect(), out.predictions)
            } else {
                let out = model.seq_forward_inputs(x)?;
                (vec![out.probs[1]], vec![out.prediction])
            };
            Ok(ClipPrediction {
                clip_id: c.clip_id.clone(),
                label: c.label,
                risk,
                predictions,
            })
        })
        .collect()
}

fn score_inputs(
    model: &Model,
    inputs: &[Vec<GraphInput>],
    clips: &[GraphClip],
) -> Result<(Scores, Vec<ClipPrediction>)> {
    let preds = predict_inputs(model, inputs, clips)?;
    let scores = score_predictions(&preds)?;
    Ok((scores, preds))
}

/// Scores predictions, broadcasting clip labels over per-frame outputs.
pub fn score_predictions(preds: &[ClipPrediction]) -> Result<Scores> {
    let mut risk = Vec::new();
    let mut hard = Vec::new();
    let mut labels = Vec::new();
    for p in preds {
        let y = match p.label {
            Some(y @ (0 | 1)) => y,
            Some(y) => return Err(Error::Label(y as i64)),
            None => return Err(Error::LabelMissing(p.clip_id.clone())),
        };
        risk.extend_from_slice(&p.risk);
        hard.extend_from_slice(&p.predictions);
        labels.extend(std::iter::repeat_n(y, p.risk.len()));
    }
    Scores::compute(&risk, &hard, &labels)
}

/// Predictions of `model` for every clip of `data`, in clip order.
pub fn predict(model: &Model, data: &SceneGraphDataset) -> Result<Vec<ClipPrediction>> {
    model.vocab.ensure_same(&Vocab::from_config(&data.config))?;
    predict_inputs(model, &prepare_clips(model, &data.clips)?, &data.clips)
}

/// Scores `model` on a labeled dataset.
pub fn evaluate(model: &Model, test: &SceneGraphDataset) -> Result<Scores> {
    if test.clips.is_empty() {
        return Err(Error::EmptyDataset);
    }
    score_predictions(&predict(model, test)?)
}
