use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::Scores;
use crate::error::{Error, Result};

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<Scores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<Scores>,
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

pub fn write_metrics_jsonl(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Inserts `value` under `run` in the JSON object at `path`, keeping other
/// runs already recorded there.
pub fn update_results_json(path: &Path, run: &str, value: serde_json::Value) -> Result<()> {
    ensure_parent(path)?;
    let mut all: BTreeMap<String, serde_json::Value> = if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
    } else {
        BTreeMap::new()
    };
    all.insert(run.to_string(), value);
    let text = serde_json::to_string_pretty(&all)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
