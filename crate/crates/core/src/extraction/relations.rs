use crate::dataset::{ActorType, LightStatus, ObjectState};
use crate::error::{Error, Result};

use super::config::{ExtractionConfig, LANE_LABELS};

/// An actor ready for relation extraction, from either ground-truth state or
/// a projected detection.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneActor {
    pub label: String,
    pub actor_type: ActorType,
    pub position: [f64; 3],
    /// `None` when the source carries no heading (image pipeline).
    pub yaw: Option<f64>,
    pub velocity: Option<[f64; 2]>,
    pub lane: Option<i64>,
    pub light: Option<LightStatus>,
    pub sign: Option<f64>,
    pub elevated: bool,
}

impl SceneActor {
    pub fn ego() -> Self {
        SceneActor {
            label: super::EGO_LABEL.to_string(),
            actor_type: ActorType::new("car"),
            position: [0.0; 3],
            yaw: Some(0.0),
            velocity: None,
            lane: None,
            light: None,
            sign: None,
            elevated: false,
        }
    }

    pub fn from_object(o: &ObjectState, actor_type: ActorType) -> Self {
        SceneActor {
            label: o.id.clone(),
            actor_type,
            position: o.position,
            yaw: Some(o.yaw),
            velocity: Some(o.velocity),
            lane: o.lane,
            light: o.light,
            sign: o.sign,
            elevated: false,
        }
    }

    /// Bare actor at a ground position, mostly for tests and tooling.
    pub fn at(label: &str, actor_type: &str, x: f64, y: f64) -> Self {
        SceneActor {
            label: label.to_string(),
            actor_type: ActorType::new(actor_type),
            position: [x, y, 0.0],
            yaw: Some(0.0),
            ..SceneActor::ego()
        }
    }
}

/// Maps a source class label to an actor type: an actor name matches itself,
/// otherwise alias lists are searched exactly, then case-insensitively.
pub fn resolve_actor_type(class_label: &str, cfg: &ExtractionConfig) -> Result<ActorType> {
    if class_label.is_empty() {
        return Err(Error::UnknownActorClass(String::new()));
    }
    if cfg.actor_names.iter().any(|a| a == class_label) {
        return Ok(ActorType::new(class_label));
    }
    let lookup = |eq: &dyn Fn(&str) -> bool| {
        cfg.alias_lists
            .iter()
            .find(|(_, names)| names.iter().any(|n| eq(n)))
            .and_then(|(key, _)| cfg.alias_key_actor(key))
    };
    lookup(&|n| n == class_label)
        .or_else(|| lookup(&|n| n.eq_ignore_ascii_case(class_label)))
        .or_else(|| {
            cfg.actor_names
                .iter()
                .find(|a| a.eq_ignore_ascii_case(class_label))
                .cloned()
        })
        .map(ActorType)
        .ok_or_else(|| Error::UnknownActorClass(class_label.to_string()))
}

pub fn planar_distance(a: &SceneActor, b: &SceneActor) -> f64 {
    (b.position[0] - a.position[0]).hypot(b.position[1] - a.position[1])
}

/// Ground-plane bearing of `to` seen from `from`, ignoring heading: 0 dead
/// ahead, 90 due right.
pub fn bearing_deg(from: &SceneActor, to: &SceneActor) -> f64 {
    let dx = to.position[0] - from.position[0];
    let dy = to.position[1] - from.position[1];
    dx.atan2(dy).to_degrees()
}

/// Wraps an angle into `[-180, 180)`.
pub fn wrap_degrees(theta: f64) -> f64 {
    let w = (theta + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

pub fn sector_for(theta: f64, cfg: &ExtractionConfig) -> Option<&str> {
    cfg.directional_thresholds
        .iter()
        .find(|(_, [lo, hi])| *lo <= theta && theta < *hi)
        .map(|(name, _)| name.as_str())
}

/// Proximity relations for an unordered pair. Each returned relation stands
/// for two directed edges.
pub fn proximity_relations(a: &SceneActor, b: &SceneActor, cfg: &ExtractionConfig) -> Vec<String> {
    let rules: Vec<_> = cfg
        .proximity_relation_list
        .iter()
        .filter(|r| r.matches(a.actor_type.as_str(), b.actor_type.as_str()))
        .collect();
    if rules.is_empty() {
        return Vec::new();
    }
    let d = planar_distance(a, b);
    let mut hits = cfg
        .proximity_thresholds
        .iter()
        .filter(|(name, thr)| d <= *thr && rules.iter().any(|r| r.allows(name)))
        .map(|(name, _)| name.clone());
    if cfg.cumulative_proximity {
        hits.collect()
    } else {
        hits.next().into_iter().collect()
    }
}

/// Directional relation of `to` in `from`'s heading frame, if the pair is
/// eligible and within the directional distance gate.
pub fn directional_relation(
    from: &SceneActor,
    to: &SceneActor,
    cfg: &ExtractionConfig,
) -> Option<String> {
    if !directional_eligible(from, to, cfg) {
        return None;
    }
    let theta = wrap_degrees(bearing_deg(from, to) - from.yaw.unwrap_or(0.0));
    sector_for(theta, cfg).map(str::to_string)
}

fn directional_eligible(a: &SceneActor, b: &SceneActor, cfg: &ExtractionConfig) -> bool {
    cfg.directional_relation_list
        .iter()
        .any(|r| r.matches(a.actor_type.as_str(), b.actor_type.as_str()))
        && planar_distance(a, b) <= cfg.directional_gate()
}

/// Directional labels for both directions of a pair. Without a heading for
/// `b`, the reverse label is the forward bearing rotated by 180 degrees.
pub(super) fn directional_pair(
    a: &SceneActor,
    b: &SceneActor,
    cfg: &ExtractionConfig,
) -> Option<(String, String)> {
    let forward = directional_relation(a, b, cfg)?;
    let reverse = match b.yaw {
        Some(_) => directional_relation(b, a, cfg)?,
        None => {
            let theta = wrap_degrees(bearing_deg(a, b) - a.yaw.unwrap_or(0.0) + 180.0);
            sector_for(theta, cfg)?.to_string()
        }
    };
    Some((forward, reverse))
}

/// Lane nodes an actor belongs to, ordered left, middle, right. Actors near a
/// lane boundary (within `lane_overlap_margin`) belong to both lanes.
pub fn lane_membership(actor: &SceneActor, cfg: &ExtractionConfig) -> Vec<&'static str> {
    let [left, middle, right] = LANE_LABELS;
    let d = actor.position[0];
    let thr = cfg.lane_threshold;
    let straddles = (d.abs() - thr).abs() <= cfg.lane_overlap_margin;
    let mut lanes = Vec::with_capacity(2);
    if d < -thr || (straddles && d < 0.0) {
        lanes.push(left);
    }
    if d.abs() <= thr || straddles {
        lanes.push(middle);
    }
    if d > thr || (straddles && d > 0.0) {
        lanes.push(right);
    }
    lanes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExtractionConfig {
        ExtractionConfig::default()
    }

    #[test]
    fn resolves_aliases() {
        let c = cfg();
        assert_eq!(resolve_actor_type("vehicle.tesla.model3", &c).unwrap().as_str(), "car");
        assert!(matches!(
            resolve_actor_type("truck", &c),
            Err(Error::UnknownActorClass(_))
        ));
        assert_eq!(resolve_actor_type("Person", &c).unwrap().as_str(), "pedestrian");
    }

    #[test]
    fn proximity_bands() {
        let c = cfg();
        let ego = SceneActor::ego();
        let at5 = SceneActor::at("car_1", "car", 3.0, 4.0);
        assert_eq!(
            proximity_relations(&ego, &at5, &c),
            vec!["Super_Near", "Very_Near", "Near", "Visible"]
        );
        let at30 = SceneActor::at("car_1", "car", 0.0, 30.0);
        assert!(proximity_relations(&ego, &at30, &c).is_empty());
        let at4 = SceneActor::at("car_1", "car", 0.0, 4.0);
        assert_eq!(proximity_relations(&ego, &at4, &c)[0], "Near_Collision");
    }

    #[test]
    fn tightest_only_mode() {
        let mut c = cfg();
        c.cumulative_proximity = false;
        let at5 = SceneActor::at("car_1", "car", 3.0, 4.0);
        assert_eq!(proximity_relations(&SceneActor::ego(), &at5, &c), vec!["Super_Near"]);
    }

    #[test]
    fn lights_only_get_visible() {
        let c = cfg();
        let light = SceneActor::at("light_1", "light", 1.0, 1.0);
        assert_eq!(proximity_relations(&SceneActor::ego(), &light, &c), vec!["Visible"]);
        assert_eq!(directional_relation(&SceneActor::ego(), &light, &c), None);
    }

    #[test]
    fn directional_sectors() {
        let c = cfg();
        let ego = SceneActor::ego();
        let fr = SceneActor::at("car_1", "car", 5.0, 10.0);
        assert_eq!(directional_relation(&ego, &fr, &c).as_deref(), Some("Front_Right"));
        let ahead = SceneActor::at("car_1", "car", 0.0, 10.0);
        assert_eq!(directional_relation(&ego, &ahead, &c).as_deref(), Some("Front_Right"));
        let far = SceneActor::at("car_1", "car", 5.0, 30.0);
        assert_eq!(directional_relation(&ego, &far, &c), None);
        // behind, slightly left
        let back = SceneActor::at("car_1", "car", -1.0, -10.0);
        assert_eq!(directional_relation(&ego, &back, &c).as_deref(), Some("Rear_Left"));
    }

    #[test]
    fn heading_rotates_frame() {
        let c = cfg();
        let mut car = SceneActor::at("car_1", "car", 0.0, 10.0);
        car.yaw = Some(90.0);
        // ego is directly behind in world terms; car faces +x so ego is on its right-rear
        assert_eq!(
            directional_relation(&car, &SceneActor::ego(), &c).as_deref(),
            Some("Right_Rear")
        );
    }

    #[test]
    fn missing_heading_reverses_sector() {
        let c = cfg();
        let mut car = SceneActor::at("car_1", "car", 5.0, 10.0);
        car.yaw = None;
        let (fwd, rev) = directional_pair(&SceneActor::ego(), &car, &c).unwrap();
        assert_eq!(fwd, "Front_Right");
        assert_eq!(rev, "Rear_Left");
    }

    #[test]
    fn lanes() {
        let c = cfg();
        let at = |x| SceneActor::at("c", "car", x, 0.0);
        assert_eq!(lane_membership(&at(0.0), &c), vec!["middle_lane"]);
        assert_eq!(lane_membership(&at(10.0), &c), vec!["right_lane"]);
        let mut c1 = cfg();
        c1.lane_overlap_margin = 1.0;
        assert_eq!(lane_membership(&at(6.5), &c1), vec!["middle_lane", "right_lane"]);
        assert_eq!(lane_membership(&at(-5.5), &c1), vec!["left_lane", "middle_lane"]);
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_degrees(180.0), -180.0);
        assert_eq!(wrap_degrees(-180.0), -180.0);
        assert_eq!(wrap_degrees(540.0), -180.0);
        assert!((wrap_degrees(-190.0) - 170.0).abs() < 1e-12);
    }
}
