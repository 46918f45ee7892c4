//! Training, evaluation, cross-validation, transfer and attention export.

mod config;
mod cv;
mod explain;
mod metrics;
mod report;
mod train;

pub use config::LearningConfig;
pub use cv::{cross_validate, transfer_evaluate, transfer_split, CvReport, FoldReport, TransferReport};
pub use explain::{
    explain, read_attention_csv, write_attention_csv, AttentionDump, AttentionRow, ATTENTION_COLUMNS,
};
pub use metrics::{auc, mcc, Confusion, Scores};
pub use report::{update_results_json, write_metrics_jsonl, MetricsRecord};
pub use train::{
    evaluate, predict, prepare_clips, score_predictions, train_frame_classifier, train_model,
    train_sequence_classifier, ClipPrediction, EpochRecord, Trained, TrainRun,
};
