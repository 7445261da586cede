//! TOML run configuration. Every section is optional and falls back to the
//! library defaults; unknown keys anywhere are an error so typos surface
//! instead of silently reverting a setting to its default. Angles are
//! radians, distances meters, durations seconds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::RegionConfig;
use crate::bev::{GridSpec, ObjectClass};
use crate::cmcs::CmcsConfig;
use crate::error::{Error, Result};
use crate::pipeline::{CheckFrames, CheckSettings};
use crate::predict::PredictorConfig;
use crate::sim::{
    AttackConfig, AttackFrames, ClassCensus, ClassSpeeds, DetectorStubConfig, SceneConfig,
    SpawnLayout,
};
use crate::tracks::TrackStoreConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Cell edge length, meters.
    pub cell_size: f64,
    /// Grid reaches `+-half_extent` meters from the ego on both axes.
    pub half_extent: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            cell_size: 0.25,
            half_extent: 32.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub frames: CheckFrames,
    pub ego_compensation: bool,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            frames: CheckFrames::Key,
            ego_compensation: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulatorSection {
    pub seed: u64,
    /// Number of scenes `simulate` writes.
    pub scenes: usize,
    pub duration_s: f64,
    pub frame_rate_hz: f64,
    pub key_frame_stride: usize,
    pub ego_speed_mps: f64,
    pub road_heading_rad: Option<f64>,
    pub oncoming_fraction: f64,
    pub size_jitter: f64,
    pub segment_duration_s: Option<f64>,
    pub heading_jitter_rad: f64,
    pub detection_range_m: f64,
    pub census: ClassCensus,
    pub speeds: ClassSpeeds,
    pub spawn: SpawnLayout,
    pub detector: DetectorStubConfig,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        let base = SceneConfig::default();
        SimulatorSection {
            seed: base.seed,
            scenes: 1,
            duration_s: base.duration_s,
            frame_rate_hz: base.frame_rate_hz,
            key_frame_stride: base.key_frame_stride,
            ego_speed_mps: base.ego_speed_mps,
            road_heading_rad: base.road_heading_rad,
            oncoming_fraction: base.oncoming_fraction,
            size_jitter: base.size_jitter,
            segment_duration_s: base.segment_duration_s,
            heading_jitter_rad: base.heading_jitter_rad,
            detection_range_m: base.detection_range_m,
            census: base.census,
            speeds: base.speeds,
            spawn: base.spawn,
            detector: base.detector,
        }
    }
}

/// `frames` accepts the string `"key"` or an explicit list of frame indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttackFramesSpec {
    Named(String),
    Explicit(Vec<u64>),
}

impl Default for AttackFramesSpec {
    fn default() -> Self {
        AttackFramesSpec::Named("key".into())
    }
}

impl AttackFramesSpec {
    fn to_attack_frames(&self) -> Result<AttackFrames> {
        match self {
            AttackFramesSpec::Named(name) if name == "key" => Ok(AttackFrames::KeyFrames),
            AttackFramesSpec::Named(name) => Err(Error::Config(format!(
                "attack.frames must be \"key\" or a list of frame indices, got \"{name}\""
            ))),
            AttackFramesSpec::Explicit(list) => Ok(AttackFrames::Explicit(list.clone())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub target_class: ObjectClass,
    pub distance_range: [f64; 2],
    pub lateral_jitter_m: f64,
    pub frames: AttackFramesSpec,
    pub duration_frames: usize,
    pub point_budget: u32,
    pub success_rate: f64,
    pub ghost_size: Option<[f64; 3]>,
    /// Injector seed; when unset it is derived from the simulator seed so a
    /// config is fully reproducible with one number.
    pub seed: Option<u64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        let base = AttackConfig::default();
        AttackSection {
            target_class: base.target_class,
            distance_range: base.distance_range,
            lateral_jitter_m: base.lateral_jitter_m,
            frames: AttackFramesSpec::default(),
            duration_frames: base.duration_frames,
            point_budget: base.point_budget,
            success_rate: base.success_rate,
            ghost_size: base.ghost_size,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// Benchmark repetitions, warm-up included; at least 10.
    pub repetitions: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { repetitions: 50 }
    }
}

/// The whole run configuration, one TOML file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub tracking: TrackStoreConfig,
    pub predictor: PredictorConfig,
    pub check: CheckSection,
    pub region: RegionConfig,
    pub cmcs: CmcsConfig,
    pub simulator: SimulatorSection,
    pub attack: AttackSection,
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse {origin}: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text, &path.display().to_string())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.cell_size, self.grid.half_extent)
    }

    /// Builds validated checker settings from the grid, tracking, predictor,
    /// check, region, and cmcs sections.
    pub fn check_settings(&self) -> Result<CheckSettings> {
        let settings = CheckSettings {
            grid: self.grid_spec()?,
            tracking: self.tracking.clone(),
            predictor: self.predictor.clone(),
            region: self.region.clone(),
            cmcs: self.cmcs.clone(),
            frames: self.check.frames,
            ego_compensation: self.check.ego_compensation,
        };
        settings.validate()?;
        Ok(settings)
    }

    /// Builds a validated scene config. The simulator's history depth is
    /// taken from the tracking section so simulated key frames line up with
    /// what the checker can verify.
    pub fn scene_config(&self) -> Result<SceneConfig> {
        let s = &self.simulator;
        let config = SceneConfig {
            scene_id: "scene".to_string(),
            seed: s.seed,
            duration_s: s.duration_s,
            frame_rate_hz: s.frame_rate_hz,
            history_k: self.tracking.history_k,
            key_frame_stride: s.key_frame_stride,
            ego_speed_mps: s.ego_speed_mps,
            road_heading_rad: s.road_heading_rad,
            oncoming_fraction: s.oncoming_fraction,
            census: s.census.clone(),
            speeds: s.speeds.clone(),
            spawn: s.spawn.clone(),
            size_jitter: s.size_jitter,
            segment_duration_s: s.segment_duration_s,
            heading_jitter_rad: s.heading_jitter_rad,
            detection_range_m: s.detection_range_m,
            detector: s.detector.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn scene_count(&self) -> usize {
        self.simulator.scenes
    }

    pub fn attack_config(&self) -> Result<AttackConfig> {
        let a = &self.attack;
        let config = AttackConfig {
            target_class: a.target_class,
            distance_range: a.distance_range,
            lateral_jitter_m: a.lateral_jitter_m,
            frames: a.frames.to_attack_frames()?,
            duration_frames: a.duration_frames,
            point_budget: a.point_budget,
            success_rate: a.success_rate,
            ghost_size: a.ghost_size,
        };
        config.validate()?;
        Ok(config)
    }

    /// Injector seed: the explicit one, or a fixed mix of the simulator seed.
    pub fn attack_seed(&self) -> u64 {
        self.attack
            .seed
            .unwrap_or(self.simulator.seed ^ 0xA77A_C4ED_5EED_0001)
    }

    pub fn bench_repetitions(&self) -> usize {
        self.bench.repetitions
    }
}
