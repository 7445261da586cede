//! Track bookkeeping: per-object observation histories built frame by frame
//! from detections, with bounded history depth and a short coasting window
//! for missed frames.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bev::{ObjectClass, Pose2};
use crate::error::{Error, Result};

/// One detection folded into a track: where the object was at a given frame.
/// Poses are in whatever frame the caller tracks in (world frame when ego
/// compensation is on, raw sensor frame otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame_index: u64,
    pub timestamp: f64,
    pub pose: Pose2,
    /// Footprint (length, width) in meters.
    pub size: [f64; 2],
    pub class: ObjectClass,
    pub object_key: String,
}

/// An object's recent history, newest last.
#[derive(Debug, Clone)]
pub struct Track {
    key: String,
    class: ObjectClass,
    observations: VecDeque<Observation>,
    missed_frames: u32,
}

impl Track {
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Class of the most recent observation.
    pub fn class(&self) -> ObjectClass {
        self.class
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Most recent observation. Tracks always hold at least one.
    pub fn last(&self) -> &Observation {
        self.observations.back().expect("track never empty")
    }

    pub fn missed_frames(&self) -> u32 {
        self.missed_frames
    }
}

/// How detections are matched to existing tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationMode {
    /// Detection ids are stable object identifiers; match by exact id.
    ByKey,
    /// Greedy nearest-neighbor on position, closest pairs first, with a
    /// maximum gating distance in meters. Unmatched detections open new
    /// tracks under generated keys.
    NearestNeighbor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackStoreConfig {
    /// History depth K: observations older than K frames behind the newest
    /// ingested frame are evicted.
    pub history_k: usize,
    /// Consecutive missed frames tolerated before a track is dropped.
    pub max_coast: u32,
    pub association: AssociationMode,
    /// Gating distance for nearest-neighbor association, meters.
    pub gating_radius_m: f64,
}

impl Default for TrackStoreConfig {
    fn default() -> Self {
        TrackStoreConfig {
            history_k: 20,
            max_coast: 2,
            association: AssociationMode::ByKey,
            gating_radius_m: 2.0,
        }
    }
}

impl TrackStoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history_k < 2 {
            return Err(Error::Config(format!(
                "history_k must be at least 2, got {}",
                self.history_k
            )));
        }
        if !(self.gating_radius_m.is_finite() && self.gating_radius_m > 0.0) {
            return Err(Error::Config(format!(
                "gating_radius_m must be positive and finite, got {}",
                self.gating_radius_m
            )));
        }
        Ok(())
    }
}

/// All live tracks, keyed by object key. Iteration order is key order, which
/// keeps every downstream consumer deterministic.
#[derive(Debug, Clone)]
pub struct TrackStore {
    config: TrackStoreConfig,
    tracks: BTreeMap<String, Track>,
    last_frame: Option<u64>,
    next_generated: u64,
}

impl TrackStore {
    pub fn new(config: TrackStoreConfig) -> Result<Self> {
        config.validate()?;
        Ok(TrackStore {
            config,
            tracks: BTreeMap::new(),
            last_frame: None,
            next_generated: 0,
        })
    }

    pub fn config(&self) -> &TrackStoreConfig {
        &self.config
    }

    /// Index of the most recently ingested frame, if any.
    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Track> {
        self.tracks.get(key)
    }

    /// Tracks in ascending key order.
    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    /// Folds one frame's observations into the store. `frame_index` must be
    /// strictly greater than any frame seen before; every observation must
    /// carry that index. An empty frame still advances coasting and
    /// eviction.
    pub fn ingest_frame(&mut self, frame_index: u64, observations: &[Observation]) -> Result<()> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(Error::FrameOrder {
                    frame: frame_index,
                    last,
                });
            }
        }
        for obs in observations {
            if obs.frame_index != frame_index {
                return Err(Error::Data(format!(
                    "observation for '{}' carries frame {} inside frame {}",
                    obs.object_key, obs.frame_index, frame_index
                )));
            }
            if obs.class == ObjectClass::Background {
                return Err(Error::Data(format!(
                    "observation '{}' is labeled background",
                    obs.object_key
                )));
            }
            if !obs.pose.is_finite() || !obs.timestamp.is_finite() {
                return Err(Error::Data(format!(
                    "observation '{}' has a non-finite pose or timestamp",
                    obs.object_key
                )));
            }
            if !obs.size.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(Error::Data(format!(
                    "observation '{}' has a non-positive size",
                    obs.object_key
                )));
            }
        }

        let assignments = match self.config.association {
            AssociationMode::ByKey => self.associate_by_key(observations)?,
            AssociationMode::NearestNeighbor => self.associate_nearest(observations),
        };

        // Update matched tracks, open new ones.
        let mut seen: Vec<&str> = Vec::with_capacity(assignments.len());
        for (key, obs_idx) in &assignments {
            let obs = &observations[*obs_idx];
            match self.tracks.get_mut(key) {
                Some(track) => {
                    let prev = track.last();
                    if obs.timestamp <= prev.timestamp {
                        return Err(Error::Data(format!(
                            "track '{key}' timestamps must be strictly increasing \
                             ({} then {})",
                            prev.timestamp, obs.timestamp
                        )));
                    }
                    track.observations.push_back(obs.clone());
                    track.class = obs.class;
                    track.missed_frames = 0;
                }
                None => {
                    let mut observations = VecDeque::new();
                    observations.push_back(obs.clone());
                    self.tracks.insert(
                        key.clone(),
                        Track {
                            key: key.clone(),
                            class: obs.class,
                            observations,
                            missed_frames: 0,
                        },
                    );
                }
            }
            seen.push(key);
        }

        // Coast or drop tracks with no match this frame.
        let seen: std::collections::BTreeSet<&str> = seen.into_iter().collect();
        let max_coast = self.config.max_coast;
        self.tracks.retain(|key, track| {
            if seen.contains(key.as_str()) {
                return true;
            }
            track.missed_frames += 1;
            track.missed_frames <= max_coast
        });

        // Evict history older than K frames behind the current frame.
        if frame_index >= self.config.history_k as u64 {
            let oldest_kept = frame_index - self.config.history_k as u64 + 1;
            self.tracks.retain(|_, track| {
                while track
                    .observations
                    .front()
                    .is_some_and(|o| o.frame_index < oldest_kept)
                {
                    track.observations.pop_front();
                }
                !track.observations.is_empty()
            });
        }

        self.last_frame = Some(frame_index);
        Ok(())
    }

    /// Key-based association: each observation matches the track with the
    /// same key, or opens one. Keys must be unique within the frame.
    fn associate_by_key(&self, observations: &[Observation]) -> Result<Vec<(String, usize)>> {
        let mut out = Vec::with_capacity(observations.len());
        let mut used = std::collections::BTreeSet::new();
        for (i, obs) in observations.iter().enumerate() {
            if !used.insert(obs.object_key.as_str()) {
                return Err(Error::Data(format!(
                    "duplicate object_key '{}' within one frame",
                    obs.object_key
                )));
            }
            out.push((obs.object_key.clone(), i));
        }
        Ok(out)
    }

    /// Greedy nearest-neighbor association. Candidate (track, observation)
    /// pairs within the gate are taken closest-first; ties break on track
    /// key, then observation order. Leftover observations open tracks under
    /// generated keys.
    fn associate_nearest(&mut self, observations: &[Observation]) -> Vec<(String, usize)> {
        struct Candidate<'a> {
            dist: f64,
            key: &'a str,
            obs_idx: usize,
        }

        let mut candidates = Vec::new();
        for (key, track) in &self.tracks {
            let last = track.last();
            for (obs_idx, obs) in observations.iter().enumerate() {
                let dist = (obs.pose.x - last.pose.x).hypot(obs.pose.y - last.pose.y);
                if dist <= self.config.gating_radius_m {
                    candidates.push(Candidate { dist, key, obs_idx });
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.dist
                .total_cmp(&b.dist)
                .then_with(|| a.key.cmp(b.key))
                .then_with(|| a.obs_idx.cmp(&b.obs_idx))
        });

        let mut taken_tracks = std::collections::BTreeSet::new();
        let mut taken_obs = vec![false; observations.len()];
        let mut out = Vec::new();
        for c in candidates {
            if taken_obs[c.obs_idx] || !taken_tracks.insert(c.key) {
                continue;
            }
            taken_obs[c.obs_idx] = true;
            out.push((c.key.to_string(), c.obs_idx));
        }
        for (obs_idx, taken) in taken_obs.iter().enumerate() {
            if !taken {
                let key = format!("trk-{:06}", self.next_generated);
                self.next_generated += 1;
                out.push((key, obs_idx));
            }
        }
        out
    }
}
