//! JSON-lines container for extracted scene-graph datasets: a header line
//! followed by one record per clip.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExtractionConfig, GraphClip, SceneGraphDataset};
use crate::error::{Error, Result};

pub const SGD_VERSION: &str = "sgd.v1";

#[derive(Serialize, Deserialize)]
struct Header {
    version: String,
    name: String,
    clips: usize,
    extraction_config: ExtractionConfig,
}

pub fn save_scenegraph_dataset(ds: &SceneGraphDataset, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        version: SGD_VERSION.to_string(),
        name: ds.name.clone(),
        clips: ds.clips.len(),
        extraction_config: ds.config.clone(),
    };
    let mut write_line = |text: String| {
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    };
    write_line(serde_json::to_string(&header)?)?;
    for clip in &ds.clips {
        write_line(serde_json::to_string(clip)?)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_scenegraph_dataset(path: &Path) -> Result<SceneGraphDataset> {
    if !path.is_file() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{} is empty", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&first)
        .map_err(|e| Error::Schema(format!("bad header: {e}")))?;
    match raw.get("version").and_then(|v| v.as_str()) {
        Some(SGD_VERSION) => {}
        other => {
            return Err(Error::Schema(format!(
                "unsupported scene-graph dataset version {other:?}, expected {SGD_VERSION}"
            )))
        }
    }
    let header: Header =
        serde_json::from_value(raw).map_err(|e| Error::Schema(format!("bad header: {e}")))?;

    let mut clips = Vec::with_capacity(header.clips);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let clip: GraphClip = serde_json::from_str(&line).map_err(|e| Error::Parse {
            clip: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        clips.push(clip);
    }
    if clips.len() != header.clips {
        return Err(Error::Schema(format!(
            "header announces {} clips, found {}",
            header.clips,
            clips.len()
        )));
    }
    Ok(SceneGraphDataset {
        name: header.name,
        config: header.extraction_config,
        clips,
    })
}
