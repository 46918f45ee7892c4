use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Scores;
use super::train::{evaluate, predict, score_predictions, train_model, ClipPrediction, EpochRecord, Trained, TrainRun};
use crate::dataset::{kfold_plan_items, stratified_split_items};
use crate::error::Result;
use crate::extraction::SceneGraphDataset;
use crate::models::Vocab;
use crate::rng::derive_seed;

const FOLD_STREAM: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub epochs: Vec<EpochRecord>,
    pub train: Scores,
    pub test: Scores,
    /// Held-out predictions of this fold.
    #[serde(skip)]
    pub predictions: Vec<ClipPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Mean test scores over folds.
    pub mean: Scores,
}

/// Stratified k-fold cross-validation. Folds train independently and may run
/// on separate workers; results come back in fold order.
pub fn cross_validate(
    data: &SceneGraphDataset,
    run: &TrainRun,
    k: usize,
    track_epochs: bool,
) -> Result<CvReport> {
    run.validate()?;
    let plan = kfold_plan_items(&data.clips, k, run.seed)?;
    let folds: Vec<FoldReport> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = plan.split(&data.clips, fold);
            let (train, test) = (data.with_clips(train), data.with_clips(test));
            let fold_run = TrainRun {
                seed: derive_seed(run.seed, FOLD_STREAM + fold as u64),
                ..run.clone()
            };
            let trained = train_model(&train, &fold_run, track_epochs.then_some(&test))?;
            let predictions = predict(&trained.model, &test)?;
            Ok(FoldReport {
                fold,
                train: evaluate(&trained.model, &train)?,
                test: score_predictions(&predictions)?,
                epochs: trained.epochs,
                predictions,
            })
        })
        .collect::<Result<_>>()?;
    let tests: Vec<Scores> = folds.iter().map(|f| f.test.clone()).collect();
    Ok(CvReport {
        mean: Scores::mean_of(&tests)?,
        folds,
    })
}

/// Source-side train/test split used by [`transfer_evaluate`].
pub fn transfer_split(
    source: &SceneGraphDataset,
    train_ratio: f64,
    seed: u64,
) -> Result<(SceneGraphDataset, SceneGraphDataset)> {
    let (train, test) = stratified_split_items(&source.clips, train_ratio, seed)?;
    Ok((source.with_clips(train), source.with_clips(test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    /// Held-out source split.
    pub source: Scores,
    /// Entire target dataset, frozen weights.
    pub target: Scores,
    /// `target.accuracy - source.accuracy`.
    pub delta: f64,
}

/// Trains once on a split of `source` and evaluates the frozen model on the
/// held-out source clips and on all of `target`.
pub fn transfer_evaluate(
    source: &SceneGraphDataset,
    target: &SceneGraphDataset,
    run: &TrainRun,
    train_ratio: f64,
) -> Result<(TransferReport, Trained)> {
    run.validate()?;
    Vocab::from_config(&source.config).ensure_same(&Vocab::from_config(&target.config))?;
    let (train, test) = transfer_split(source, train_ratio, run.seed)?;
    let trained = train_model(&train, run, None)?;
    let s = evaluate(&trained.model, &test)?;
    let t = evaluate(&trained.model, target)?;
    Ok((
        TransferReport {
            delta: t.accuracy - s.accuracy,
            source: s,
            target: t,
        },
        trained,
    ))
}
