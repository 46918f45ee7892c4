//! Road scene-graph extraction and spatio-temporal graph learning.
//!
//! The crate turns per-frame road observations (ground-truth object state or
//! 2D detections projected to a birds-eye view) into multi-relational
//! scene-graphs, and trains graph neural networks over scene-graph sequences
//! for risk assessment and collision prediction.

pub mod autodiff;
pub mod bev;
pub mod dataset;
pub mod error;
pub mod extraction;
pub mod models;
pub mod rng;
pub mod synth;
pub mod tasks;

pub use bev::{BevCalibration, GroundPoint};
pub use dataset::{Clip, Dataset, Detection, FrameRecord, ObjectState, Variant};
pub use error::{Error, ErrorKind, Result};
pub use extraction::{ExtractionConfig, SceneGraph, SceneGraphDataset};
pub use models::{Model, ModelConfig};
pub use tasks::{Scores, TrainRun};
