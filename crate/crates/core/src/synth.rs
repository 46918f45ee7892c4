//! Seeded generator of labeled state-variant driving clips.
//!
//! Safe clips keep every vehicle more than 16 ft from the ego and from each
//! other in every frame. Risky clips script one vehicle that closes in on the
//! ego along a straight path and stays within 4 ft over the final 3 frames.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ActorType, Clip, Dataset, FramePayload, FrameRecord, ObjectState, Units, Variant};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng, SeededRng};

pub const SAFE_MIN_GAP_FT: f64 = 16.0;
pub const COLLISION_GAP_FT: f64 = 4.0;
/// Frames at the end of a risky clip that are within the collision gap.
pub const COLLISION_FRAMES: usize = 3;
const FRAMES_PER_SECOND: f64 = 10.0;
const MAX_TRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub name: String,
    pub clips: usize,
    pub risky_fraction: f64,
    pub frames: usize,
    /// Lateral distance between lane centres, feet.
    pub lane_width: f64,
    /// Multiplies every relative speed and the approach start distance.
    pub speed_scale: f64,
    /// Standard deviation of per-frame position noise, feet.
    pub noise_sigma: f64,
    /// Background vehicles per clip, beyond the scripted one.
    pub max_background: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synthetic".into(),
            clips: 120,
            risky_fraction: 0.5,
            frames: 20,
            lane_width: 12.0,
            speed_scale: 1.0,
            noise_sigma: 0.5,
            max_background: 2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.clips == 0 || self.frames == 0 {
            return bad("clips and frames must be positive");
        }
        if !(0.0..=1.0).contains(&self.risky_fraction) {
            return bad("risky_fraction must lie in [0, 1]");
        }
        if !(self.lane_width > 0.0 && self.speed_scale > 0.0 && self.noise_sigma >= 0.0) {
            return bad("lane_width and speed_scale must be positive, noise_sigma non-negative");
        }
        if self.noise_sigma > 1.0 {
            return bad("noise_sigma above 1 ft cannot keep risky clips within the collision gap");
        }
        Ok(())
    }

    pub fn risky_count(&self) -> usize {
        (self.clips as f64 * self.risky_fraction).round() as usize
    }
}

type Track = Vec<[f64; 2]>;

fn noisy(track: &[[f64; 2]], noise: &Normal<f64>, rng: &mut SeededRng) -> Track {
    track
        .iter()
        .map(|p| [p[0] + noise.sample(rng), p[1] + noise.sample(rng)])
        .collect()
}

fn gap(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn lane_centre(cfg: &SynthConfig, rng: &mut SeededRng) -> f64 {
    cfg.lane_width * rng.random_range(-1i32..=1) as f64
}

/// A straight background track that stays clear of the ego and of `others`.
fn background_track(
    cfg: &SynthConfig,
    others: &[Track],
    noise: &Normal<f64>,
    rng: &mut SeededRng,
) -> Option<Track> {
    for _ in 0..MAX_TRIES {
        let x0 = lane_centre(cfg, rng) + rng.random_range(-1.0..1.0);
        let y0 = rng.random_range(-45.0..45.0);
        let vy = rng.random_range(-1.0..1.0) * cfg.speed_scale;
        let vx = rng.random_range(-0.05..0.05);
        let clean: Track = (0..cfg.frames)
            .map(|t| [x0 + vx * t as f64, y0 + vy * t as f64])
            .collect();
        let track = noisy(&clean, noise, rng);
        let clear = track.iter().enumerate().all(|(t, p)| {
            gap(*p, [0.0, 0.0]) > SAFE_MIN_GAP_FT
                && others.iter().all(|o| gap(*p, o[t]) > SAFE_MIN_GAP_FT)
        });
        if clear {
            return Some(track);
        }
    }
    None
}

/// Track that closes linearly on the ego and holds within the collision gap
/// over the final frames.
fn approach_track(cfg: &SynthConfig, noise: &Normal<f64>, rng: &mut SeededRng) -> Track {
    let arrive = cfg.frames.saturating_sub(COLLISION_FRAMES);
    let hold_from = cfg.frames.saturating_sub(COLLISION_FRAMES);
    loop {
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let start = [
            lane_centre(cfg, rng) + rng.random_range(-1.0..1.0),
            side * rng.random_range(26.0..45.0) * cfg.speed_scale,
        ];
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let radius = rng.random_range(1.0..2.5);
        let end = [radius * angle.sin(), radius * angle.cos()];
        let clean: Track = (0..cfg.frames)
            .map(|t| {
                if arrive == 0 || t >= arrive {
                    end
                } else {
                    let s = t as f64 / arrive as f64;
                    [start[0] + (end[0] - start[0]) * s, start[1] + (end[1] - start[1]) * s]
                }
            })
            .collect();
        let track = noisy(&clean, noise, rng);
        if track[hold_from..]
            .iter()
            .all(|p| gap(*p, [0.0, 0.0]) <= COLLISION_GAP_FT - 0.25)
        {
            return track;
        }
    }
}

fn to_frames(tracks: &[(String, Track)], frames: usize, rng: &mut SeededRng) -> Vec<FrameRecord> {
    let yaws: Vec<f64> = tracks.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
    (0..frames)
        .map(|t| {
            let objects = tracks
                .iter()
                .zip(&yaws)
                .map(|((id, track), yaw)| {
                    let prev = track[t.saturating_sub(1)];
                    let cur = track[t];
                    ObjectState {
                        id: id.clone(),
                        actor_type: ActorType::new("car"),
                        position: [cur[0], cur[1], 0.0],
                        yaw: *yaw,
                        velocity: [
                            (cur[0] - prev[0]) * FRAMES_PER_SECOND,
                            (cur[1] - prev[1]) * FRAMES_PER_SECOND,
                        ],
                        acceleration: None,
                        lane: None,
                        light: None,
                        sign: None,
                    }
                })
                .collect();
            FrameRecord {
                frame_index: t as u64,
                payload: FramePayload::Objects(objects),
            }
        })
        .collect()
}

fn generate_clip(cfg: &SynthConfig, index: usize, risky: bool, seed: u64) -> Result<Clip> {
    let mut rng = seeded_rng(derive_seed(seed, index as u64));
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|e| Error::Config(format!("synth noise: {e}")))?;
    let mut tracks: Vec<Track> = Vec::new();
    if risky {
        tracks.push(approach_track(cfg, &noise, &mut rng));
    }
    let background = if risky {
        rng.random_range(0..=cfg.max_background)
    } else {
        rng.random_range(1..=cfg.max_background + 1)
    };
    let start = tracks.len();
    for _ in 0..background {
        let others = if risky { &[][..] } else { &tracks[start..] };
        if let Some(t) = background_track(cfg, others, &noise, &mut rng) {
            tracks.push(t);
        }
    }
    if tracks.is_empty() {
        return Err(Error::Config("synth: could not place a safe background vehicle".into()));
    }
    let mut ids: Vec<usize> = (1..=tracks.len()).collect();
    ids.shuffle(&mut rng);
    let named: Vec<(String, Track)> = ids
        .iter()
        .zip(tracks)
        .map(|(i, t)| (format!("car_{i}"), t))
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("scenario".to_string(), if risky { "risky" } else { "safe" }.to_string());
    if risky {
        metadata.insert("approaching_id".to_string(), named[0].0.clone());
    }
    Ok(Clip {
        clip_id: format!("{}_{index:04}", cfg.name),
        frames: to_frames(&named, cfg.frames, &mut rng),
        label: Some(u8::from(risky)),
        raw_score: None,
        metadata,
    })
}

/// Generates a labeled dataset; identical `(cfg, seed)` yield identical output.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..cfg.clips).collect();
    order.shuffle(&mut seeded_rng(derive_seed(seed, u64::MAX)));
    let mut risky = vec![false; cfg.clips];
    for &i in &order[..cfg.risky_count()] {
        risky[i] = true;
    }
    let clips = (0..cfg.clips)
        .map(|i| generate_clip(cfg, i, risky[i], seed))
        .collect::<Result<_>>()?;
    Ok(Dataset {
        name: cfg.name.clone(),
        variant: Variant::State,
        units: Units::Feet,
        clips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positions(f: &FrameRecord) -> Vec<(String, [f64; 2])> {
        match &f.payload {
            FramePayload::Objects(o) => o.iter().map(|o| (o.id.clone(), [o.position[0], o.position[1]])).collect(),
            FramePayload::Detections(_) => unreachable!(),
        }
    }

    #[test]
    fn labels_and_geometry() {
        let cfg = SynthConfig {
            clips: 40,
            ..Default::default()
        };
        let d = generate(&cfg, 7).unwrap();
        assert_eq!(d.clips.iter().filter(|c| c.label == Some(1)).count(), 20);
        for c in &d.clips {
            assert_eq!(c.frames.len(), 20);
            if c.label == Some(0) {
                for f in &c.frames {
                    let p = positions(f);
                    for (i, (_, a)) in p.iter().enumerate() {
                        assert!(gap(*a, [0.0, 0.0]) > SAFE_MIN_GAP_FT);
                        for (_, b) in &p[i + 1..] {
                            assert!(gap(*a, *b) > SAFE_MIN_GAP_FT);
                        }
                    }
                }
            } else {
                let id = &c.metadata["approaching_id"];
                for f in &c.frames[17..] {
                    let (_, p) = positions(f).into_iter().find(|(i, _)| i == id).unwrap();
                    assert!(gap(p, [0.0, 0.0]) <= COLLISION_GAP_FT);
                }
            }
        }
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig {
            clips: 6,
            ..Default::default()
        };
        assert_eq!(generate(&cfg, 1).unwrap(), generate(&cfg, 1).unwrap());
        assert_ne!(generate(&cfg, 1).unwrap(), generate(&cfg, 2).unwrap());
    }

    #[test]
    fn short_clips() {
        let cfg = SynthConfig {
            clips: 4,
            frames: 2,
            ..Default::default()
        };
        let d = generate(&cfg, 3).unwrap();
        assert!(d.clips.iter().all(|c| c.frames.len() == 2));
    }
}
