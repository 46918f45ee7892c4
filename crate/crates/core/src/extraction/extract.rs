use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::config::{ExtractionConfig, EGO_LABEL, IS_IN, LANE_LABELS};
use super::relations::{
    directional_pair, lane_membership, proximity_relations, resolve_actor_type, SceneActor,
};
use super::{GraphClip, NodeAttributes, SceneGraph, SceneGraphDataset, SceneGraphEdge, SceneGraphNode};
use crate::bev::{project_detection_forced, BevCalibration};
use crate::dataset::{ActorType, Clip, Dataset, Detection, FramePayload, FrameRecord, ObjectState, Variant};
use crate::error::{Error, Result};

/// Non-fatal extraction issue, e.g. an object with an unknown class.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub frame_index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub graph: SceneGraph,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipGraphs {
    pub graphs: Vec<SceneGraph>,
    pub warnings: Vec<Warning>,
}

/// Converts state records into actors, skipping unresolvable classes.
pub fn actors_from_objects(
    objects: &[ObjectState],
    frame_index: u64,
    cfg: &ExtractionConfig,
) -> (Vec<SceneActor>, Vec<Warning>) {
    let mut actors = Vec::with_capacity(objects.len());
    let mut warnings = Vec::new();
    for o in objects {
        match resolve_actor_type(o.actor_type.as_str(), cfg) {
            Ok(t) => actors.push(SceneActor::from_object(o, t)),
            Err(e) => warnings.push(Warning {
                frame_index,
                message: format!("skipping `{}`: {e}", o.id),
            }),
        }
    }
    (actors, warnings)
}

/// Projects detections through the calibration. Labels are `<type>_<n>` with
/// `n` counting per type in detection order.
pub fn actors_from_detections(
    detections: &[Detection],
    frame_index: u64,
    cal: &BevCalibration,
    cfg: &ExtractionConfig,
) -> (Vec<SceneActor>, Vec<Warning>) {
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut actors = Vec::new();
    let mut warnings = Vec::new();
    for det in detections {
        let actor_type = match resolve_actor_type(&det.class_label, cfg) {
            Ok(t) => t,
            Err(e) => {
                warnings.push(Warning {
                    frame_index,
                    message: format!("skipping detection: {e}"),
                });
                continue;
            }
        };
        let projected = project_detection_forced(det, cal);
        if projected.outside_region {
            warnings.push(Warning {
                frame_index,
                message: format!(
                    "skipping `{}` detection outside the calibrated road region",
                    det.class_label
                ),
            });
            continue;
        }
        let n = counters.entry(actor_type.0.clone()).or_default();
        *n += 1;
        let elevated = matches!(actor_type.as_str(), "light" | "sign");
        actors.push(SceneActor {
            label: format!("{}_{}", actor_type, n),
            actor_type,
            position: [projected.point.x, projected.point.y, 0.0],
            yaw: None,
            velocity: None,
            lane: None,
            light: None,
            sign: None,
            elevated,
        });
    }
    (actors, warnings)
}

/// Builds the scene-graph for one frame's actors (ego excluded; it is added).
pub fn build_graph(
    mut actors: Vec<SceneActor>,
    frame_index: u64,
    cfg: &ExtractionConfig,
) -> Result<SceneGraph> {
    let mut seen = BTreeSet::new();
    for a in &actors {
        if a.position.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFrame(format!(
                "`{}` has a non-finite position",
                a.label
            )));
        }
        if a.label == EGO_LABEL || LANE_LABELS.contains(&a.label.as_str()) {
            return Err(Error::InvalidFrame(format!("`{}` is a reserved node label", a.label)));
        }
        if !seen.insert(a.label.as_str()) {
            return Err(Error::InvalidFrame(format!("duplicate object id `{}`", a.label)));
        }
        if cfg.actor_id(a.actor_type.as_str()).is_none() {
            return Err(Error::UnknownActorClass(a.actor_type.0.clone()));
        }
    }
    actors.sort_by(|a, b| a.label.cmp(&b.label));

    let mut nodes = Vec::with_capacity(actors.len() + 4);
    nodes.push(actor_node(0, &SceneActor::ego()));
    for (i, lane) in LANE_LABELS.iter().enumerate() {
        nodes.push(SceneGraphNode {
            node_id: i + 1,
            label: lane.to_string(),
            actor_type: ActorType::new("lane"),
            attributes: NodeAttributes::default(),
        });
    }
    let first_actor = nodes.len();
    for (i, a) in actors.iter().enumerate() {
        nodes.push(actor_node(first_actor + i, a));
    }

    // node ids of the relation-bearing actors, ego first
    let mut participants: Vec<(usize, SceneActor)> = vec![(0, SceneActor::ego())];
    participants.extend(actors.into_iter().enumerate().map(|(i, a)| (first_actor + i, a)));

    let lane_id = |label: &str| 1 + LANE_LABELS.iter().position(|l| *l == label).unwrap_or(1);
    let mut edges = vec![SceneGraphEdge {
        src: 0,
        dst: lane_id("middle_lane"),
        relation: IS_IN.to_string(),
    }];
    for (id, a) in participants.iter().skip(1) {
        if cfg.lane_actor_names.iter().any(|t| t == a.actor_type.as_str()) {
            for lane in lane_membership(a, cfg) {
                edges.push(SceneGraphEdge {
                    src: *id,
                    dst: lane_id(lane),
                    relation: IS_IN.to_string(),
                });
            }
        }
    }

    for i in 0..participants.len() {
        if cfg.ego_only && i > 0 {
            break;
        }
        for j in (i + 1)..participants.len() {
            let (ia, a) = &participants[i];
            let (ib, b) = &participants[j];
            for rel in proximity_relations(a, b, cfg) {
                edges.push(SceneGraphEdge {
                    src: *ia,
                    dst: *ib,
                    relation: rel.clone(),
                });
                edges.push(SceneGraphEdge {
                    src: *ib,
                    dst: *ia,
                    relation: rel,
                });
            }
            if let Some((fwd, rev)) = directional_pair(a, b, cfg) {
                edges.push(SceneGraphEdge {
                    src: *ia,
                    dst: *ib,
                    relation: fwd,
                });
                edges.push(SceneGraphEdge {
                    src: *ib,
                    dst: *ia,
                    relation: rev,
                });
            }
        }
    }

    Ok(SceneGraph {
        frame_index,
        nodes,
        edges,
    })
}

fn actor_node(node_id: usize, a: &SceneActor) -> SceneGraphNode {
    SceneGraphNode {
        node_id,
        label: a.label.clone(),
        actor_type: a.actor_type.clone(),
        attributes: NodeAttributes {
            source_id: (node_id != 0).then(|| a.label.clone()),
            position: Some(a.position),
            yaw: a.yaw,
            velocity: a.velocity,
            lane: a.lane,
            light: a.light,
            sign: a.sign,
            elevated: a.elevated,
        },
    }
}

/// Extracts one frame. Image frames need a calibration.
pub fn extract_graph(
    frame: &FrameRecord,
    cfg: &ExtractionConfig,
    calibration: Option<&BevCalibration>,
) -> Result<Extracted> {
    let (actors, warnings) = match &frame.payload {
        FramePayload::Objects(objects) => actors_from_objects(objects, frame.frame_index, cfg),
        FramePayload::Detections(dets) => {
            let cal = calibration.ok_or_else(|| {
                Error::Config("image frames need a BEV calibration".into())
            })?;
            actors_from_detections(dets, frame.frame_index, cal, cfg)
        }
    };
    let graph = build_graph(actors, frame.frame_index, cfg)?;
    Ok(Extracted { graph, warnings })
}

pub fn extract_sequence(
    clip: &Clip,
    cfg: &ExtractionConfig,
    calibration: Option<&BevCalibration>,
) -> Result<ClipGraphs> {
    if clip.frames.is_empty() {
        return Err(Error::EmptyClip);
    }
    let mut graphs = Vec::with_capacity(clip.frames.len());
    let mut warnings = Vec::new();
    for frame in &clip.frames {
        let ex = extract_graph(frame, cfg, calibration).map_err(|e| Error::Frame {
            clip: clip.clip_id.clone(),
            frame_index: frame.frame_index,
            source: Box::new(e),
        })?;
        graphs.push(ex.graph);
        warnings.extend(ex.warnings);
    }
    Ok(ClipGraphs { graphs, warnings })
}

/// Extracts every clip, in parallel, keeping clip order. Warnings are
/// returned per clip id.
pub fn extract_dataset(
    dataset: &Dataset,
    cfg: &ExtractionConfig,
    calibration: Option<&BevCalibration>,
) -> Result<(SceneGraphDataset, Vec<(String, Warning)>)> {
    cfg.validate()?;
    if dataset.variant == Variant::Image && calibration.is_none() {
        return Err(Error::Config("image datasets need a BEV calibration".into()));
    }
    let per_clip: Vec<Result<(GraphClip, Vec<Warning>)>> = dataset
        .clips
        .par_iter()
        .map(|clip| {
            let out = extract_sequence(clip, cfg, calibration)?;
            Ok((
                GraphClip {
                    clip_id: clip.clip_id.clone(),
                    label: clip.label,
                    metadata: clip.metadata.clone(),
                    graphs: out.graphs,
                },
                out.warnings,
            ))
        })
        .collect();

    let mut clips = Vec::with_capacity(per_clip.len());
    let mut warnings = Vec::new();
    for r in per_clip {
        let (clip, w) = r?;
        warnings.extend(w.into_iter().map(|w| (clip.clip_id.clone(), w)));
        clips.push(clip);
    }
    Ok((
        SceneGraphDataset {
            name: dataset.name.clone(),
            config: cfg.clone(),
            clips,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(id: &str, x: f64, y: f64) -> ObjectState {
        ObjectState {
            id: id.into(),
            actor_type: ActorType::new("car"),
            position: [x, y, 0.0],
            yaw: 0.0,
            velocity: [0.0, 0.0],
            acceleration: None,
            lane: None,
            light: None,
            sign: None,
        }
    }

    fn frame(idx: u64, objects: Vec<ObjectState>) -> FrameRecord {
        FrameRecord {
            frame_index: idx,
            payload: FramePayload::Objects(objects),
        }
    }

    #[test]
    fn empty_frame_is_ego_and_lanes() {
        let g = extract_graph(&frame(0, vec![]), &ExtractionConfig::default(), None)
            .unwrap()
            .graph;
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.edges.len(), 1);
        assert!(g.has_edge(0, 2, IS_IN));
        let labels: Vec<_> = g.nodes.iter().map(|n| n.label.as_str()).collect();
        assert_eq!(labels, ["ego_car", "left_lane", "middle_lane", "right_lane"]);
    }

    #[test]
    fn one_car_ahead() {
        let g = extract_graph(&frame(0, vec![car("car_1", 0.0, 5.0)]), &ExtractionConfig::default(), None)
            .unwrap()
            .graph;
        let mut got: Vec<_> = g
            .edges
            .iter()
            .map(|e| (e.src, e.dst, e.relation.as_str()))
            .collect();
        got.sort();
        let mut want = vec![(0, 2, "isIn"), (4, 2, "isIn"), (0, 4, "Front_Right"), (4, 0, "Rear_Left")];
        for r in ["Super_Near", "Very_Near", "Near", "Visible"] {
            want.push((0, 4, r));
            want.push((4, 0, r));
        }
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn unknown_class_is_skipped_with_warning() {
        let mut truck = car("t", 1.0, 1.0);
        truck.actor_type = ActorType::new("truck");
        let ex = extract_graph(&frame(3, vec![truck]), &ExtractionConfig::default(), None).unwrap();
        assert_eq!(ex.graph.nodes.len(), 4);
        assert_eq!(ex.warnings.len(), 1);
        assert_eq!(ex.warnings[0].frame_index, 3);
    }

    #[test]
    fn all_pairs_vs_ego_only() {
        let objs = vec![car("a", 0.0, 5.0), car("b", 3.0, 8.0), car("c", -3.0, 9.0)];
        let mut cfg = ExtractionConfig::default();
        let all = extract_graph(&frame(0, objs.clone()), &cfg, None).unwrap().graph;
        cfg.ego_only = true;
        let ego = extract_graph(&frame(0, objs), &cfg, None).unwrap().graph;
        let all_set: BTreeSet<_> = all.edges.iter().cloned().collect();
        assert!(ego.edges.iter().all(|e| all_set.contains(e)));
        // car-car pairs contribute only in the all-pairs graph
        assert!(all.edges.iter().any(|e| e.src != 0 && e.dst != 0 && e.relation != IS_IN));
        assert!(ego.edges.iter().all(|e| e.src == 0 || e.dst == 0 || e.relation == IS_IN));
    }

    #[test]
    fn sequence_keeps_order_and_reports_bad_frame() {
        let clip = Clip {
            clip_id: "c".into(),
            frames: vec![
                frame(0, vec![car("a", 0.0, 5.0)]),
                frame(1, vec![car("a", 0.0, 5.0), car("a", 1.0, 1.0)]),
            ],
            label: Some(1),
            raw_score: None,
            metadata: Default::default(),
        };
        match extract_sequence(&clip, &ExtractionConfig::default(), None) {
            Err(Error::Frame { frame_index, .. }) => assert_eq!(frame_index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let ok = Clip {
            frames: vec![clip.frames[0].clone(), clip.frames[0].clone(), frame(2, vec![])],
            ..clip
        };
        let out = extract_sequence(&ok, &ExtractionConfig::default(), None).unwrap();
        assert_eq!(out.graphs.len(), 3);
        assert_eq!(out.graphs[0].edges, out.graphs[1].edges);
        assert_eq!(out.graphs[2].frame_index, 2);
    }

    #[test]
    fn image_frames_need_calibration() {
        let f = FrameRecord {
            frame_index: 0,
            payload: FramePayload::Detections(vec![]),
        };
        assert!(matches!(
            extract_graph(&f, &ExtractionConfig::default(), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn detections_become_typed_nodes() {
        let img = [[140.0, 300.0], [500.0, 300.0], [640.0, 100.0], [0.0, 100.0]];
        let cal = BevCalibration::new(img, [24.0, 60.0], 320.0).unwrap();
        let dets = vec![
            Detection {
                class_label: "car".into(),
                bbox: [300.0, 250.0, 340.0, 290.0],
                confidence: 0.9,
            },
            Detection {
                class_label: "traffic light".into(),
                bbox: [200.0, 120.0, 210.0, 140.0],
                confidence: 0.8,
            },
        ];
        let f = FrameRecord {
            frame_index: 0,
            payload: FramePayload::Detections(dets),
        };
        let g = extract_graph(&f, &ExtractionConfig::default(), Some(&cal)).unwrap().graph;
        let car = g.node_by_label("car_1").unwrap();
        assert!(car.attributes.position.unwrap()[1] > 0.0);
        assert!(g.node_by_label("light_1").unwrap().attributes.elevated);
    }
}
