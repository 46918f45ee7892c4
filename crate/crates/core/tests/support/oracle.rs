//! Brute-force relation rules for the default extraction config, written
//! against the object list directly (no shared code with the extractor).

use std::collections::BTreeMap;

use rand::Rng;
use scenegraph_core::dataset::{ActorType, FramePayload, ObjectState};
use scenegraph_core::{FrameRecord, SceneGraph};

pub type EdgeBag = BTreeMap<(String, String, String), usize>;

const MOVERS: [&str; 4] = ["car", "motorcycle", "bicycle", "pedestrian"];
const FIXED: [&str; 2] = ["light", "sign"];
const LANE_ACTORS: [&str; 3] = ["car", "motorcycle", "bicycle"];
const BANDS: [(&str, f64); 5] = [
    ("Near_Collision", 4.0),
    ("Super_Near", 7.0),
    ("Very_Near", 10.0),
    ("Near", 16.0),
    ("Visible", 25.0),
];
/// Sectors of 45 degrees clockwise from dead ahead.
const SECTORS: [&str; 8] = [
    "Front_Right",
    "Right_Front",
    "Right_Rear",
    "Rear_Right",
    "Rear_Left",
    "Left_Rear",
    "Left_Front",
    "Front_Left",
];

struct Body {
    label: String,
    kind: String,
    x: f64,
    y: f64,
    yaw: f64,
}

pub fn random_frame(rng: &mut impl Rng, frame_index: u64) -> FrameRecord {
    let n = rng.random_range(0..=10);
    let kinds = ["car", "car", "car", "motorcycle", "bicycle", "pedestrian", "light", "sign"];
    let objects = (0..n)
        .map(|i| ObjectState {
            id: format!("obj_{i}"),
            actor_type: ActorType::new(kinds[rng.random_range(0..kinds.len())]),
            position: [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), 0.0],
            yaw: rng.random_range(-180.0..180.0),
            velocity: [0.0, 0.0],
            acceleration: None,
            lane: None,
            light: None,
            sign: None,
        })
        .collect();
    FrameRecord {
        frame_index,
        payload: FramePayload::Objects(objects),
    }
}

fn bodies(frame: &FrameRecord) -> Vec<Body> {
    let FramePayload::Objects(objects) = &frame.payload else {
        panic!("oracle handles state frames only");
    };
    let mut out = vec![Body {
        label: "ego_car".into(),
        kind: "car".into(),
        x: 0.0,
        y: 0.0,
        yaw: 0.0,
    }];
    out.extend(objects.iter().map(|o| Body {
        label: o.id.clone(),
        kind: o.actor_type.as_str().to_string(),
        x: o.position[0],
        y: o.position[1],
        yaw: o.yaw,
    }));
    out
}

fn band_allowed(a: &str, b: &str, band: &str) -> bool {
    let mover = |t: &str| MOVERS.contains(&t);
    let fixed = |t: &str| FIXED.contains(&t);
    (mover(a) && mover(b)) || (band == "Visible" && ((mover(a) && fixed(b)) || (fixed(a) && mover(b))))
}

fn sector(from: &Body, to: &Body) -> &'static str {
    let raw = (to.x - from.x).atan2(to.y - from.y).to_degrees() - from.yaw;
    let clockwise = raw - 360.0 * (raw / 360.0).floor();
    SECTORS[((clockwise / 45.0).floor() as usize).min(7)]
}

/// Expected edges of a frame as `(src_label, dst_label, relation)` counts.
pub fn oracle_edges(frame: &FrameRecord, ego_only: bool) -> EdgeBag {
    let bs = bodies(frame);
    let mut bag = EdgeBag::new();
    let mut put = |a: &str, b: &str, r: &str| {
        *bag.entry((a.to_string(), b.to_string(), r.to_string())).or_default() += 1;
    };
    put("ego_car", "middle_lane", "isIn");
    for b in bs.iter().skip(1).filter(|b| LANE_ACTORS.contains(&b.kind.as_str())) {
        // distance from x to each lane's interval, within the overlap margin
        let (half, margin) = (6.0, 1.5);
        if (b.x + half).max(0.0) <= margin {
            put(&b.label, "left_lane", "isIn");
        }
        if (b.x.abs() - half).max(0.0) <= margin {
            put(&b.label, "middle_lane", "isIn");
        }
        if (half - b.x).max(0.0) <= margin {
            put(&b.label, "right_lane", "isIn");
        }
    }
    for a in &bs {
        for b in &bs {
            if a.label == b.label || (ego_only && a.label != "ego_car" && b.label != "ego_car") {
                continue;
            }
            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            for (band, thr) in BANDS {
                if d <= thr && band_allowed(&a.kind, &b.kind, band) {
                    put(&a.label, &b.label, band);
                }
            }
            let both_move = MOVERS.contains(&a.kind.as_str()) && MOVERS.contains(&b.kind.as_str());
            if both_move && d <= 16.0 {
                put(&a.label, &b.label, sector(a, b));
            }
        }
    }
    bag
}

pub fn graph_edges(g: &SceneGraph) -> EdgeBag {
    let mut bag = EdgeBag::new();
    for e in &g.edges {
        let key = (
            g.nodes[e.src].label.clone(),
            g.nodes[e.dst].label.clone(),
            e.relation.clone(),
        );
        *bag.entry(key).or_default() += 1;
    }
    bag
}

/// Edge-by-edge differences between two bags, for failure messages.
pub fn bag_diff(expected: &EdgeBag, got: &EdgeBag) -> Vec<String> {
    let mut out = Vec::new();
    for (k, n) in expected {
        let m = got.get(k).copied().unwrap_or(0);
        if m != *n {
            out.push(format!("{k:?}: expected {n}, got {m}"));
        }
    }
    for (k, m) in got {
        if !expected.contains_key(k) {
            out.push(format!("{k:?}: unexpected x{m}"));
        }
    }
    out
}

const NEST: [&str; 5] = ["Near_Collision", "Super_Near", "Very_Near", "Near", "Visible"];

/// Directed pairs whose proximity labels are not upward-closed.
pub fn nesting_violations(g: &SceneGraph) -> usize {
    let bag = graph_edges(g);
    let mut violations = 0;
    for (s, d, r) in bag.keys() {
        if let Some(i) = NEST.iter().position(|n| n == r) {
            for wider in &NEST[i + 1..] {
                if !bag.contains_key(&(s.clone(), d.clone(), wider.to_string())) {
                    violations += 1;
                }
            }
        }
    }
    violations
}
