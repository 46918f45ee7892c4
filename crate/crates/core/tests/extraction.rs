mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use scenegraph_core::dataset::{ActorType, FramePayload, ObjectState};
use scenegraph_core::extraction::{export_dot, extract_graph, IS_IN};
use scenegraph_core::{ExtractionConfig, FrameRecord, SceneGraph};
use support::oracle::{bag_diff, graph_edges, nesting_violations, oracle_edges, random_frame};

fn frame_of(points: &[(f64, f64, f64)]) -> FrameRecord {
    FrameRecord {
        frame_index: 0,
        payload: FramePayload::Objects(
            points
                .iter()
                .enumerate()
                .map(|(i, &(x, y, yaw))| ObjectState {
                    id: format!("car_{i}"),
                    actor_type: ActorType::new("car"),
                    position: [x, y, 0.0],
                    yaw,
                    velocity: [0.0, 0.0],
                    acceleration: None,
                    lane: None,
                    light: None,
                    sign: None,
                })
                .collect(),
        ),
    }
}

fn graph(frame: &FrameRecord, cfg: &ExtractionConfig) -> SceneGraph {
    extract_graph(frame, cfg, None).unwrap().graph
}

#[test]
fn matches_oracle_on_random_frames() {
    let mut rng = Pcg64Mcg::seed_from_u64(17);
    let cfg = ExtractionConfig::default();
    let ego_cfg = ExtractionConfig {
        ego_only: true,
        ..ExtractionConfig::default()
    };
    for i in 0..300 {
        let f = random_frame(&mut rng, i);
        let diff = bag_diff(&oracle_edges(&f, false), &graph_edges(&graph(&f, &cfg)));
        assert!(diff.is_empty(), "frame {i}: {diff:#?}");
        let diff = bag_diff(&oracle_edges(&f, true), &graph_edges(&graph(&f, &ego_cfg)));
        assert!(diff.is_empty(), "ego-only frame {i}: {diff:#?}");
    }
}

#[test]
fn proximity_bands_nest() {
    let mut rng = Pcg64Mcg::seed_from_u64(5);
    let cfg = ExtractionConfig::default();
    for i in 0..300 {
        assert_eq!(nesting_violations(&graph(&random_frame(&mut rng, i), &cfg)), 0);
    }
}

/// Minimal line-oriented check of the DOT output shape.
fn check_dot(text: &str, g: &SceneGraph) -> Result<(), String> {
    let lines: Vec<&str> = text.lines().collect();
    let header = format!("digraph \"frame_{}\" {{", g.frame_index);
    if lines.first() != Some(&header.as_str()) || lines.last() != Some(&"}") {
        return Err("bad header or footer".into());
    }
    let (mut nodes, mut edges) = (0, 0);
    for line in &lines[1..lines.len() - 1] {
        let line = line.trim();
        if line == "rankdir=LR;" || line == "node [shape=box];" {
            continue;
        }
        let body = line.strip_suffix("];").ok_or(format!("unterminated `{line}`"))?;
        let (head, attrs) = body.split_once(" [").ok_or(format!("no attributes `{line}`"))?;
        for attr in attrs.split(", ") {
            let (k, v) = attr.split_once('=').ok_or(format!("bad attribute `{attr}`"))?;
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(format!("bad key `{k}`"));
            }
            if !(v.len() >= 2 && v.starts_with('"') && v.ends_with('"')) {
                return Err(format!("unquoted value `{v}`"));
            }
        }
        let is_id = |s: &str| s.strip_prefix('n').is_some_and(|d| d.parse::<usize>().is_ok());
        match head.split_once(" -> ") {
            Some((a, b)) if is_id(a) && is_id(b) => edges += 1,
            None if is_id(head) => nodes += 1,
            _ => return Err(format!("bad statement `{line}`")),
        }
    }
    if nodes != g.nodes.len() || edges != g.edges.len() {
        return Err(format!("{nodes} nodes / {edges} edges, expected {} / {}", g.nodes.len(), g.edges.len()));
    }
    Ok(())
}

#[test]
fn dot_export_is_well_formed() {
    let mut rng = Pcg64Mcg::seed_from_u64(9);
    let cfg = ExtractionConfig::default();
    for i in 0..50 {
        let g = graph(&random_frame(&mut rng, i), &cfg);
        let text = export_dot(&g);
        check_dot(&text, &g).unwrap();
        let blue = text.lines().filter(|l| l.contains("color=\"blue\"")).count();
        let directional = g
            .edges
            .iter()
            .filter(|e| cfg.directional_thresholds.iter().any(|(n, _)| *n == e.relation))
            .count();
        assert_eq!(blue, directional);
    }
}

fn coord() -> impl Strategy<Value = f64> {
    -40.0..40.0f64
}

proptest! {
    #[test]
    fn zero_thresholds_leave_only_lane_edges(
        pts in proptest::collection::vec((coord(), coord(), -180.0..180.0f64), 0..8)
    ) {
        let cfg = ExtractionConfig {
            proximity_thresholds: ExtractionConfig::default()
                .proximity_thresholds
                .iter()
                .enumerate()
                .map(|(i, (n, _))| (n.clone(), i as f64 * 1e-9))
                .collect(),
            directional_max_distance: Some(0.0),
            ..ExtractionConfig::default()
        };
        let g = graph(&frame_of(&pts), &cfg);
        prop_assert!(g.edges.iter().all(|e| e.relation == IS_IN));
        prop_assert!(g.edges.len() > pts.len());
    }

    #[test]
    fn ego_only_is_a_subset(pts in proptest::collection::vec((coord(), coord(), -180.0..180.0f64), 0..8)) {
        let f = frame_of(&pts);
        let full = graph_edges(&graph(&f, &ExtractionConfig::default()));
        let ego = graph_edges(&graph(&f, &ExtractionConfig { ego_only: true, ..ExtractionConfig::default() }));
        for (k, n) in &ego {
            prop_assert_eq!(full.get(k), Some(n));
            let touches_ego = k.0 == "ego_car" || k.1 == "ego_car" || k.2 == IS_IN;
            prop_assert!(touches_ego, "{:?}", k);
        }
    }

    #[test]
    fn directional_labels_are_total_within_gate(
        pts in proptest::collection::vec((coord(), coord(), -180.0..180.0f64), 1..8)
    ) {
        let cfg = ExtractionConfig::default();
        let g = graph(&frame_of(&pts), &cfg);
        let sectors: Vec<&str> = cfg.directional_thresholds.iter().map(|(n, _)| n.as_str()).collect();
        let actors: Vec<usize> = std::iter::once(0).chain(4..g.nodes.len()).collect();
        for &a in &actors {
            for &b in &actors {
                if a == b {
                    continue;
                }
                let pa = g.nodes[a].attributes.position.unwrap();
                let pb = g.nodes[b].attributes.position.unwrap();
                let within = (pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= cfg.directional_gate();
                let n = g.edges.iter().filter(|e| e.src == a && e.dst == b && sectors.contains(&e.relation.as_str())).count();
                prop_assert_eq!(n, usize::from(within));
            }
        }
    }
}
