//! Clip/frame dataset model, directory ingestion and split utilities.

mod io;
mod split;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{detect_variant, load_dataset, save_dataset, FEET_PER_METER};
pub use split::{
    class_counts, class_weights, downsample, downsample_items, kfold_plan, kfold_plan_items,
    stratified_split, stratified_split_items, Labeled, SplitPlan,
};

/// Road actor type name, resolved against the extraction config's `actor_names`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorType(pub String);

impl ActorType {
    pub fn new(name: impl Into<String>) -> Self {
        ActorType(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ActorType {
    fn from(s: &str) -> Self {
        ActorType(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightStatus {
    Red,
    Yellow,
    Green,
    Off,
}

/// Ground-truth state of one actor in the ego frame.
///
/// Positions are feet with `+x` to the ego's right and `+y` ahead of it.
/// `yaw` is in degrees, `0` facing the ego's forward axis and positive when
/// turned towards `+x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    pub actor_type: ActorType,
    pub position: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceleration: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light: Option<LightStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<f64>,
}

/// A 2D detector output in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub class_label: String,
    /// `[x_min, y_min, x_max, y_max]`
    pub bbox: [f64; 4],
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FramePayload {
    Objects(Vec<ObjectState>),
    Detections(Vec<Detection>),
}

impl FramePayload {
    pub fn variant(&self) -> Variant {
        match self {
            FramePayload::Objects(_) => Variant::State,
            FramePayload::Detections(_) => Variant::Image,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame", into = "RawFrame")]
pub struct FrameRecord {
    pub frame_index: u64,
    pub payload: FramePayload,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    frame_index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objects: Option<Vec<ObjectState>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detections: Option<Vec<Detection>>,
}

impl TryFrom<RawFrame> for FrameRecord {
    type Error = String;

    fn try_from(raw: RawFrame) -> Result<Self, Self::Error> {
        let payload = match (raw.objects, raw.detections) {
            (Some(o), None) => FramePayload::Objects(o),
            (None, Some(d)) => FramePayload::Detections(d),
            (Some(_), Some(_)) => {
                return Err("frame carries both `objects` and `detections`".into())
            }
            (None, None) => return Err("frame needs `objects` or `detections`".into()),
        };
        Ok(FrameRecord {
            frame_index: raw.frame_index,
            payload,
        })
    }
}

impl From<FrameRecord> for RawFrame {
    fn from(f: FrameRecord) -> Self {
        let (objects, detections) = match f.payload {
            FramePayload::Objects(o) => (Some(o), None),
            FramePayload::Detections(d) => (None, Some(d)),
        };
        RawFrame {
            frame_index: f.frame_index,
            objects,
            detections,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub clip_id: String,
    pub frames: Vec<FrameRecord>,
    /// 0 = safe, 1 = risky / collision.
    pub label: Option<u8>,
    pub raw_score: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    State,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Feet,
    Meters,
}

/// An ingested dataset. All distances are feet regardless of `units`, which
/// records the unit the source declared.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub variant: Variant,
    pub units: Units,
    pub clips: Vec<Clip>,
}

impl Dataset {
    pub fn with_clips(&self, clips: Vec<Clip>) -> Dataset {
        Dataset {
            name: self.name.clone(),
            variant: self.variant,
            units: self.units,
            clips,
        }
    }
}

impl Labeled for Clip {
    fn clip_id(&self) -> &str {
        &self.clip_id
    }

    fn label(&self) -> Option<u8> {
        self.label
    }
}
