use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvKind {
    Mrgcn,
    Mrgin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PoolKind {
    Sagpool { ratio: f64 },
    Topk { ratio: f64 },
    None,
}

impl PoolKind {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            PoolKind::Sagpool { ratio } | PoolKind::Topk { ratio } => Some(*ratio),
            PoolKind::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutKind {
    Max,
    Mean,
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalKind {
    LstmLast,
    LstmSum,
    LstmAttn,
    /// No recurrence: the sequence embedding is the mean graph embedding.
    None,
}

impl TemporalKind {
    pub fn uses_lstm(self) -> bool {
        !matches!(self, TemporalKind::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Sequence,
    PerFrame,
}

/// Architecture and regularisation settings of a scene-graph model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub conv_kind: ConvKind,
    pub layer_sizes: Vec<usize>,
    pub pool: PoolKind,
    pub readout: ReadoutKind,
    pub temporal: TemporalKind,
    pub lstm_hidden: usize,
    /// Hidden widths of the classification head; the output layer has 2 units.
    pub mlp_sizes: Vec<usize>,
    pub task: TaskKind,
    pub dropout: f64,
    pub seed: u64,
    /// Append normalised position attributes to the one-hot type features.
    pub node_attributes: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            conv_kind: ConvKind::Mrgcn,
            layer_sizes: vec![64, 64],
            pool: PoolKind::Sagpool { ratio: 0.5 },
            readout: ReadoutKind::Add,
            temporal: TemporalKind::LstmAttn,
            lstm_hidden: 64,
            mlp_sizes: vec![32],
            task: TaskKind::Sequence,
            dropout: 0.1,
            seed: 0,
            node_attributes: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layer_sizes.is_empty() {
            return bad("at least one conv layer is required".into());
        }
        if self.layer_sizes.contains(&0) || self.mlp_sizes.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        if let Some(r) = self.pool.ratio() {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("pooling ratio {r} outside (0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.temporal.uses_lstm() && self.lstm_hidden == 0 {
            return bad("lstm_hidden must be positive".into());
        }
        if self.task == TaskKind::PerFrame && !self.temporal.uses_lstm() {
            return bad("per_frame task needs an LSTM temporal model".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
