//! Multi-relational graph encoders, pooling, temporal models and the
//! composed sequence and per-frame classifiers.

mod config;
mod features;
pub mod layers;
mod model;

pub use config::{ConvKind, ModelConfig, PoolKind, ReadoutKind, TaskKind, TemporalKind};
pub use features::{GraphInput, RelationEdges, Vocab};
pub use model::{
    predict_label, softmax2, Conv, FrameOutput, FrameTrace, Model, Pool, SeqOutput, SeqTrace,
};
