//! Frame → multi-relational scene-graph extraction.

mod config;
mod dot;
mod extract;
mod relations;
mod sgd;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{ActorType, Labeled, LightStatus};

pub use config::{ExtractionConfig, PairRule, EGO_LABEL, IS_IN, LANE_LABELS};
pub use dot::export_dot;
pub use extract::{
    actors_from_detections, actors_from_objects, build_graph, extract_dataset, extract_graph,
    extract_sequence, ClipGraphs, Extracted, Warning,
};
pub use relations::{
    bearing_deg, directional_relation, lane_membership, planar_distance, proximity_relations,
    resolve_actor_type, sector_for, wrap_degrees, SceneActor,
};
pub use sgd::{load_scenegraph_dataset, save_scenegraph_dataset, SGD_VERSION};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeAttributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light: Option<LightStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<f64>,
    /// Projected from an above-ground detection (lights, signs).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub elevated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphNode {
    pub node_id: usize,
    pub label: String,
    pub actor_type: ActorType,
    #[serde(default)]
    pub attributes: NodeAttributes,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SceneGraphEdge {
    pub src: usize,
    pub dst: usize,
    pub relation: String,
}

/// One frame's scene-graph. Node 0 is the ego, nodes 1..=3 the left, middle
/// and right lanes, followed by the frame's actors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub frame_index: u64,
    pub nodes: Vec<SceneGraphNode>,
    pub edges: Vec<SceneGraphEdge>,
}

impl SceneGraph {
    pub fn node_by_label(&self, label: &str) -> Option<&SceneGraphNode> {
        self.nodes.iter().find(|n| n.label == label)
    }

    pub fn has_edge(&self, src: usize, dst: usize, relation: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.src == src && e.dst == dst && e.relation == relation)
    }
}

/// Scene-graph sequence of one clip, with its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphClip {
    pub clip_id: String,
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    pub graphs: Vec<SceneGraph>,
}

impl Labeled for GraphClip {
    fn clip_id(&self) -> &str {
        &self.clip_id
    }

    fn label(&self) -> Option<u8> {
        self.label
    }
}

/// Extracted scene-graphs for a whole dataset plus the config that built them.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraphDataset {
    pub name: String,
    pub config: ExtractionConfig,
    pub clips: Vec<GraphClip>,
}

impl SceneGraphDataset {
    pub fn with_clips(&self, clips: Vec<GraphClip>) -> Self {
        SceneGraphDataset {
            name: self.name.clone(),
            config: self.config.clone(),
            clips,
        }
    }

    pub fn clip(&self, clip_id: &str) -> Option<&GraphClip> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }
}
