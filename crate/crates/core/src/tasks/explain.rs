use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::prepare_clips;
use crate::error::{Error, Result};
use crate::extraction::SceneGraphDataset;
use crate::models::{Model, Vocab};

pub const ATTENTION_COLUMNS: [&str; 7] =
    ["clip_id", "frame_index", "node_label", "alpha", "beta", "prediction", "label"];

/// One node of one frame with its spatial and temporal attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRow {
    pub clip_id: String,
    pub frame_index: u64,
    pub node_label: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub prediction: u8,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionDump {
    pub rows: Vec<AttentionRow>,
    /// Temporal weights per clip, when the model has temporal attention.
    pub betas: Vec<(String, Vec<f64>)>,
    pub warnings: Vec<String>,
}

/// Records node attention (from the pooling layer) and temporal attention
/// for every frame of every clip. Models lacking either source still yield
/// rows, with the missing column empty.
pub fn explain(model: &Model, data: &SceneGraphDataset) -> Result<AttentionDump> {
    model.vocab.ensure_same(&Vocab::from_config(&data.config))?;
    let mut dump = AttentionDump::default();
    if model.config.pool.ratio().is_none() {
        dump.warnings.push("model has no pooling layer; alpha column left empty".into());
    }
    if model.config.temporal != crate::models::TemporalKind::LstmAttn || model.is_per_frame() {
        dump.warnings.push("model has no temporal attention; beta column left empty".into());
    }
    let inputs = prepare_clips(model, &data.clips)?;
    for (clip, x) in data.clips.iter().zip(&inputs) {
        let (alphas, beta, predictions) = if model.is_per_frame() {
            let out = model.frame_forward_inputs(x)?;
            (out.alphas, None, out.predictions)
        } else {
            let out = model.seq_forward_inputs(x)?;
            (out.alphas, out.beta, vec![out.prediction; x.len()])
        };
        for (t, g) in clip.graphs.iter().enumerate() {
            for (i, node) in g.nodes.iter().enumerate() {
                dump.rows.push(AttentionRow {
                    clip_id: clip.clip_id.clone(),
                    frame_index: g.frame_index,
                    node_label: node.label.clone(),
                    alpha: alphas[t].as_ref().map(|a| a[i]),
                    beta: beta.as_ref().map(|b| b[t]),
                    prediction: predictions[t],
                    label: clip.label,
                });
            }
        }
        if let Some(b) = beta {
            dump.betas.push((clip.clip_id.clone(), b));
        }
    }
    Ok(dump)
}

pub fn write_attention_csv(path: &Path, rows: &[AttentionRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(ATTENTION_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_attention_csv(path: &Path) -> Result<Vec<AttentionRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ATTENTION_COLUMNS {
        return Err(Error::Schema(format!("unexpected attention columns {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
