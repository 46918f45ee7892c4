use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainRun;
use crate::error::{Error, Result};

/// Learning configuration file: a [`TrainRun`] plus evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Key under which results are recorded.
    pub run_name: String,
    #[serde(flatten)]
    pub run: TrainRun,
    /// Cross-validation folds; values below 2 skip cross-validation.
    pub folds: usize,
    /// Source share used for training in transfer runs.
    pub train_ratio: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            run_name: "default".into(),
            run: TrainRun::default(),
            folds: 0,
            train_ratio: 0.7,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!(
                "train_ratio must lie in (0, 1), got {}",
                self.train_ratio
            )));
        }
        if self.run_name.is_empty() {
            return Err(Error::Config("run_name must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: LearningConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("learning config: {e}")))?;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattened_fields_parse() {
        let c = LearningConfig::from_json(
            r#"{"run_name": "r", "epochs": 3, "learning_rate": 0.01, "folds": 5,
                "model": {"conv_kind": "mrgin"}}"#,
        )
        .unwrap();
        assert_eq!(c.run.epochs, 3);
        assert_eq!(c.folds, 5);
        assert_eq!(c.run.model.conv_kind, crate::models::ConvKind::Mrgin);
        assert!(LearningConfig::from_json(r#"{"train_ratio": 1.0}"#).is_err());
    }
}
