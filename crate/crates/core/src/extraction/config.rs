use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IS_IN: &str = "isIn";
pub const EGO_LABEL: &str = "ego_car";
pub const LANE_LABELS: [&str; 3] = ["left_lane", "middle_lane", "right_lane"];

/// Object-type pair a relation family applies to. Order does not matter.
///
/// Serialized either as `["car", "car"]` or, to restrict the pair to a subset
/// of relations, as `{"pair": ["car", "light"], "relations": ["Visible"]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairRule {
    Pair([String; 2]),
    Scoped {
        pair: [String; 2],
        relations: Vec<String>,
    },
}

impl PairRule {
    pub fn types(&self) -> (&str, &str) {
        match self {
            PairRule::Pair([a, b]) | PairRule::Scoped { pair: [a, b], .. } => (a, b),
        }
    }

    pub fn matches(&self, a: &str, b: &str) -> bool {
        let (x, y) = self.types();
        (x == a && y == b) || (x == b && y == a)
    }

    pub fn allows(&self, relation: &str) -> bool {
        match self {
            PairRule::Pair(_) => true,
            PairRule::Scoped { relations, .. } => relations.iter().any(|r| r == relation),
        }
    }
}

/// Scene-graph construction settings.
///
/// Alias lists are flattened into the top level under keys ending in
/// `_names` (`car_names`, `moto_names`, ...), mirroring the usual
/// scene-graph config layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub actor_names: Vec<String>,
    pub relation_names: Vec<String>,
    /// `(relation, max distance ft)`, strictly increasing.
    pub proximity_thresholds: Vec<(String, f64)>,
    pub proximity_relation_list: Vec<PairRule>,
    /// `(relation, [min_deg, max_deg))`, together covering `[-180, 180)`.
    pub directional_thresholds: Vec<(String, [f64; 2])>,
    pub directional_relation_list: Vec<PairRule>,
    /// Defaults to the `Near` threshold (or the widest band when absent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directional_max_distance: Option<f64>,
    /// Half a lane width, feet.
    pub lane_threshold: f64,
    pub lane_overlap_margin: f64,
    /// Actor types assigned to lanes.
    pub lane_actor_names: Vec<String>,
    pub ego_only: bool,
    /// Assign every satisfied proximity band rather than only the tightest.
    pub cumulative_proximity: bool,
    #[serde(flatten)]
    pub alias_lists: BTreeMap<String, Vec<String>>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let movers = ["car", "motorcycle", "bicycle", "pedestrian"];
        let mut proximity_pairs = Vec::new();
        for (i, a) in movers.iter().enumerate() {
            for b in &movers[i..] {
                proximity_pairs.push(PairRule::Pair([a.to_string(), b.to_string()]));
            }
        }
        let directional_pairs = proximity_pairs.clone();
        for fixed in ["light", "sign"] {
            for m in movers {
                proximity_pairs.push(PairRule::Scoped {
                    pair: [m.to_string(), fixed.to_string()],
                    relations: vec!["Visible".into()],
                });
            }
        }

        let mut alias_lists = BTreeMap::new();
        alias_lists.insert(
            "car_names".into(),
            s(&[
                "vehicle.audi.a2",
                "vehicle.audi.tt",
                "vehicle.bmw.grandtourer",
                "vehicle.chevrolet.impala",
                "vehicle.dodge_charger.police",
                "vehicle.lincoln.mkz2017",
                "vehicle.mercedes-benz.coupe",
                "vehicle.nissan.micra",
                "vehicle.tesla.model3",
                "vehicle.toyota.prius",
                "car",
                "bus",
            ]),
        );
        alias_lists.insert(
            "moto_names".into(),
            s(&[
                "vehicle.harley-davidson.low_rider",
                "vehicle.kawasaki.ninja",
                "vehicle.yamaha.yzf",
                "motorcycle",
                "motorbike",
            ]),
        );
        alias_lists.insert(
            "bicycle_names".into(),
            s(&[
                "vehicle.bh.crossbike",
                "vehicle.diamondback.century",
                "vehicle.gazelle.omafiets",
                "bicycle",
            ]),
        );
        alias_lists.insert(
            "ped_names".into(),
            s(&["walker.pedestrian.0001", "walker.pedestrian.0002", "person", "pedestrian"]),
        );
        alias_lists.insert("light_names".into(), s(&["traffic.traffic_light", "traffic light", "traffic_light"]));
        alias_lists.insert(
            "sign_names".into(),
            s(&["traffic.stop", "traffic.speed_limit", "stop sign", "stop_sign"]),
        );

        ExtractionConfig {
            actor_names: s(&["car", "motorcycle", "bicycle", "pedestrian", "lane", "light", "sign"]),
            relation_names: s(&[
                IS_IN,
                "Near_Collision",
                "Super_Near",
                "Very_Near",
                "Near",
                "Visible",
                "Front_Left",
                "Left_Front",
                "Left_Rear",
                "Rear_Left",
                "Rear_Right",
                "Right_Rear",
                "Right_Front",
                "Front_Right",
            ]),
            proximity_thresholds: vec![
                ("Near_Collision".into(), 4.0),
                ("Super_Near".into(), 7.0),
                ("Very_Near".into(), 10.0),
                ("Near".into(), 16.0),
                ("Visible".into(), 25.0),
            ],
            proximity_relation_list: proximity_pairs,
            directional_thresholds: vec![
                ("Front_Right".into(), [0.0, 45.0]),
                ("Right_Front".into(), [45.0, 90.0]),
                ("Right_Rear".into(), [90.0, 135.0]),
                ("Rear_Right".into(), [135.0, 180.0]),
                ("Front_Left".into(), [-45.0, 0.0]),
                ("Left_Front".into(), [-90.0, -45.0]),
                ("Left_Rear".into(), [-135.0, -90.0]),
                ("Rear_Left".into(), [-180.0, -135.0]),
            ],
            directional_relation_list: directional_pairs,
            directional_max_distance: None,
            lane_threshold: 6.0,
            lane_overlap_margin: 1.5,
            lane_actor_names: s(&["car", "motorcycle", "bicycle"]),
            ego_only: false,
            cumulative_proximity: true,
            alias_lists,
        }
    }
}

impl ExtractionConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses and validates a config. Keys left out take their defaults; a
    /// config without any `*_names` alias list keeps the default lists.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: ExtractionConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.alias_lists.is_empty() {
            cfg.alias_lists = ExtractionConfig::default().alias_lists;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_names.iter().position(|r| r == name)
    }

    pub fn actor_id(&self, name: &str) -> Option<usize> {
        self.actor_names.iter().position(|a| a == name)
    }

    /// Effective distance gate for directional relations.
    pub fn directional_gate(&self) -> f64 {
        self.directional_max_distance.unwrap_or_else(|| {
            self.proximity_thresholds
                .iter()
                .find(|(r, _)| r == "Near")
                .or_else(|| self.proximity_thresholds.last())
                .map(|(_, d)| *d)
                .unwrap_or(0.0)
        })
    }

    /// Actor type named by an alias-list key such as `car_names` or `ped_names`.
    pub fn alias_key_actor(&self, key: &str) -> Option<String> {
        let stem = key.strip_suffix("_names")?;
        let candidate = match stem {
            "moto" => "motorcycle",
            "ped" => "pedestrian",
            other => other,
        };
        [candidate, stem]
            .into_iter()
            .find(|c| self.actor_names.iter().any(|a| a == c))
            .map(str::to_string)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let actors: BTreeSet<&str> = self.actor_names.iter().map(String::as_str).collect();
        let relations: BTreeSet<&str> = self.relation_names.iter().map(String::as_str).collect();
        if actors.len() != self.actor_names.len() || relations.len() != self.relation_names.len() {
            return err("actor_names and relation_names must not repeat".into());
        }
        for required in ["car", "lane"] {
            if !actors.contains(required) {
                return err(format!("actor_names must include `{required}`"));
            }
        }
        if !relations.contains(IS_IN) {
            return err(format!("relation_names must include `{IS_IN}`"));
        }
        if !(self.lane_threshold > 0.0) {
            return err("lane_threshold must be positive".into());
        }
        if !(self.lane_overlap_margin >= 0.0) {
            return err("lane_overlap_margin must be non-negative".into());
        }

        for w in self.proximity_thresholds.windows(2) {
            if !(w[0].1 < w[1].1) {
                return err("proximity_thresholds must be strictly increasing".into());
            }
        }
        for (name, d) in &self.proximity_thresholds {
            if !relations.contains(name.as_str()) {
                return err(format!("proximity relation `{name}` is not in relation_names"));
            }
            if !(d.is_finite() && *d >= 0.0) {
                return err(format!("proximity threshold for `{name}` must be finite and >= 0"));
            }
        }

        if !self.directional_thresholds.is_empty() {
            let mut sectors: Vec<_> = self.directional_thresholds.iter().collect();
            sectors.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]));
            let mut edge = -180.0;
            for (name, [lo, hi]) in sectors {
                if !relations.contains(name.as_str()) {
                    return err(format!("directional relation `{name}` is not in relation_names"));
                }
                if *lo != edge || !(lo < hi) {
                    return err("directional_thresholds must partition [-180, 180)".into());
                }
                edge = *hi;
            }
            if edge != 180.0 {
                return err("directional_thresholds must partition [-180, 180)".into());
            }
        }

        for rule in self
            .proximity_relation_list
            .iter()
            .chain(&self.directional_relation_list)
        {
            let (a, b) = rule.types();
            for t in [a, b] {
                if !actors.contains(t) {
                    return err(format!("relation pair uses unknown actor type `{t}`"));
                }
            }
            if let PairRule::Scoped { relations: rs, .. } = rule {
                if let Some(r) = rs.iter().find(|r| !relations.contains(r.as_str())) {
                    return err(format!("relation pair scopes unknown relation `{r}`"));
                }
            }
        }
        for t in &self.lane_actor_names {
            if !actors.contains(t.as_str()) {
                return err(format!("lane_actor_names uses unknown actor type `{t}`"));
            }
        }
        for key in self.alias_lists.keys() {
            if self.alias_key_actor(key).is_none() {
                return err(format!("alias list `{key}` does not name an actor type"));
            }
        }
        Ok(())
    }
}
