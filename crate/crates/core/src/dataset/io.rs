use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Clip, Dataset, FramePayload, FrameRecord, Units, Variant};
use crate::error::{Error, Result};

pub const FEET_PER_METER: f64 = 3.28084;

const MANIFEST: &str = "manifest.json";
const FRAMES: &str = "frames.jsonl";
const LABEL: &str = "label.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    variant: Variant,
    units: Units,
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelFile {
    label: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_score: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

/// Variant of the dataset at `path`: the manifest's when present, otherwise
/// the payload kind of the first frame found.
pub fn detect_variant(path: &Path) -> Result<Variant> {
    if !path.is_dir() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let manifest_path = path.join(MANIFEST);
    if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", manifest_path.display())))?;
        return Ok(manifest.variant);
    }
    let mut dirs: Vec<_> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(FRAMES).is_file())
        .collect();
    dirs.sort();
    let first = dirs
        .first()
        .ok_or_else(|| Error::Schema(format!("{} holds no clips", path.display())))?;
    let frames_path = first.join(FRAMES);
    let file = fs::File::open(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&frames_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: FrameRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("{}: {e}", frames_path.display())))?;
        return Ok(frame.payload.variant());
    }
    Err(Error::Schema(format!("{} is empty", frames_path.display())))
}

/// Loads a dataset laid out as `<root>/manifest.json` plus one directory per
/// clip holding `frames.jsonl` and an optional `label.json`.
pub fn load_dataset(path: &Path, variant: Variant) -> Result<Dataset> {
    if !path.is_dir() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let manifest_path = path.join(MANIFEST);
    let manifest = if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        serde_json::from_str::<Manifest>(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", manifest_path.display())))?
    } else {
        Manifest {
            variant,
            units: Units::Feet,
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        }
    };
    if manifest.variant != variant {
        return Err(Error::Schema(format!(
            "manifest declares {:?} variant but {:?} was requested",
            manifest.variant, variant
        )));
    }

    let mut clip_dirs = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        if entry.path().is_dir() {
            clip_dirs.push(entry.path());
        }
    }
    clip_dirs.sort();

    let mut clips = Vec::with_capacity(clip_dirs.len());
    for dir in clip_dirs {
        let clip_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        clips.push(load_clip(&dir, clip_id, variant, manifest.units)?);
    }
    clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));

    Ok(Dataset {
        name: manifest.name,
        variant,
        units: manifest.units,
        clips,
    })
}

fn load_clip(dir: &Path, clip_id: String, variant: Variant, units: Units) -> Result<Clip> {
    let frames_path = dir.join(FRAMES);
    if !frames_path.is_file() {
        return Err(Error::NotFound(frames_path));
    }
    let file = fs::File::open(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    let mut frames = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(&frames_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            clip: clip_id.clone(),
            line: line_no,
            message,
        };
        let mut frame: FrameRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if frame.payload.variant() != variant {
            return Err(Error::Schema(format!(
                "clip `{clip_id}` line {line_no}: {:?} frame in a {:?} dataset",
                frame.payload.variant(),
                variant
            )));
        }
        validate_frame(&frame).map_err(parse_err)?;
        if units == Units::Meters {
            to_feet(&mut frame);
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::Schema(format!("clip `{clip_id}` has no frames")));
    }
    frames.sort_by_key(|f| f.frame_index);
    if frames.windows(2).any(|w| w[0].frame_index == w[1].frame_index) {
        return Err(Error::Schema(format!(
            "clip `{clip_id}` repeats a frame_index"
        )));
    }

    let label_path = dir.join(LABEL);
    let (label, raw_score, metadata) = if label_path.is_file() {
        let text = fs::read_to_string(&label_path).map_err(|e| Error::io(&label_path, e))?;
        let lf: LabelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            clip: clip_id.clone(),
            line: 1,
            message: format!("label.json: {e}"),
        })?;
        let label = match lf.label {
            0 => 0u8,
            1 => 1u8,
            other => return Err(Error::Label(other)),
        };
        (Some(label), lf.raw_score, lf.metadata)
    } else {
        (None, None, BTreeMap::new())
    };

    Ok(Clip {
        clip_id,
        frames,
        label,
        raw_score,
        metadata,
    })
}

fn validate_frame(frame: &FrameRecord) -> std::result::Result<(), String> {
    match &frame.payload {
        FramePayload::Objects(objects) => {
            for o in objects {
                if o.position.iter().any(|c| !c.is_finite()) {
                    return Err(format!("object `{}` has a non-finite position", o.id));
                }
                if !(-180.0..180.0).contains(&o.yaw) {
                    return Err(format!("object `{}` yaw {} outside [-180, 180)", o.id, o.yaw));
                }
            }
        }
        FramePayload::Detections(dets) => {
            for d in dets {
                let [x0, y0, x1, y1] = d.bbox;
                if !(x0 < x1 && y0 < y1) {
                    return Err(format!("detection `{}` has an empty bbox", d.class_label));
                }
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(format!(
                        "detection `{}` confidence {} outside [0, 1]",
                        d.class_label, d.confidence
                    ));
                }
            }
        }
    }
    Ok(())
}

fn to_feet(frame: &mut FrameRecord) {
    if let FramePayload::Objects(objects) = &mut frame.payload {
        for o in objects {
            o.position.iter_mut().for_each(|c| *c *= FEET_PER_METER);
            o.velocity.iter_mut().for_each(|c| *c *= FEET_PER_METER);
            if let Some(a) = &mut o.acceleration {
                a.iter_mut().for_each(|c| *c *= FEET_PER_METER);
            }
        }
    }
}

/// Writes `dataset` in the layout read by [`load_dataset`]. Values are already
/// in feet, so the manifest always declares feet.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let manifest = Manifest {
        variant: dataset.variant,
        units: Units::Feet,
        name: dataset.name.clone(),
    };
    write_json(&path.join(MANIFEST), &manifest)?;

    for clip in &dataset.clips {
        let dir = path.join(&clip.clip_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let frames_path = dir.join(FRAMES);
        let mut out = String::new();
        for frame in &clip.frames {
            out.push_str(&serde_json::to_string(frame)?);
            out.push('\n');
        }
        fs::write(&frames_path, out).map_err(|e| Error::io(&frames_path, e))?;

        if let Some(label) = clip.label {
            let lf = LabelFile {
                label: i64::from(label),
                raw_score: clip.raw_score,
                metadata: clip.metadata.clone(),
            };
            write_json(&dir.join(LABEL), &lf)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let text = serde_json::to_string_pretty(value)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}
