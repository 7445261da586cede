//! Synthetic driving scenes and the ghost-object attack injector.
//!
//! A scene puts the ego vehicle on a straight road at constant speed and
//! surrounds it with independently moving objects. Every object gets its own
//! lateral lane slot, offset from the ego's lane, so ground-truth footprints
//! never overlap and nothing ever crosses the lane directly ahead of the
//! ego. A detector stub turns ground truth into ego-frame detections with
//! configurable Gaussian noise and dropouts.
//!
//! The injector adds ghost detections a few meters in front of the ego. It
//! is strictly append-only: existing detections, ground truth, and ego poses
//! are byte-identical in its output.
//!
//! All randomness flows from `ChaCha8` generators seeded from the config, so
//! identical configs reproduce identical logs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::align::Provenance;
use crate::bev::{ego_transform, ego_untransform, normalize_yaw, ObjectClass, Pose2};
use crate::error::{Error, Result};
use crate::framelog::{
    AttackRecord, Box3Record, DetectionRecord, FrameRecord, GroundTruthRecord, PoseRecord,
    SCHEMA_VERSION,
};

/// Reserved prefix for injected detection ids.
pub const GHOST_ID_PREFIX: &str = "ghost-";

/// Typical (length, width, height) per class, before per-object jitter.
pub fn class_size_prior(class: ObjectClass) -> [f64; 3] {
    match class {
        ObjectClass::Vehicle => [4.5, 1.8, 1.6],
        ObjectClass::Pedestrian => [0.6, 0.6, 1.7],
        ObjectClass::Bike => [1.7, 0.6, 1.4],
        ObjectClass::Others => [1.0, 1.0, 1.0],
        ObjectClass::Background => [1.0, 1.0, 1.0],
    }
}

/// How many objects of each class a scene holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassCensus {
    pub vehicle: usize,
    pub pedestrian: usize,
    pub bike: usize,
    pub others: usize,
}

impl Default for ClassCensus {
    fn default() -> Self {
        ClassCensus {
            vehicle: 10,
            pedestrian: 4,
            bike: 3,
            others: 1,
        }
    }
}

impl ClassCensus {
    pub fn total(&self) -> usize {
        self.vehicle + self.pedestrian + self.bike + self.others
    }
}

/// Speed range (min, max) in m/s per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassSpeeds {
    pub vehicle: [f64; 2],
    pub pedestrian: [f64; 2],
    pub bike: [f64; 2],
    pub others: [f64; 2],
}

impl Default for ClassSpeeds {
    fn default() -> Self {
        ClassSpeeds {
            vehicle: [2.0, 8.0],
            pedestrian: [0.5, 1.5],
            bike: [1.0, 5.0],
            others: [0.5, 3.0],
        }
    }
}

impl ClassSpeeds {
    fn range_for(&self, class: ObjectClass) -> [f64; 2] {
        match class {
            ObjectClass::Vehicle => self.vehicle,
            ObjectClass::Pedestrian => self.pedestrian,
            ObjectClass::Bike => self.bike,
            _ => self.others,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("vehicle", self.vehicle),
            ("pedestrian", self.pedestrian),
            ("bike", self.bike),
            ("others", self.others),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && 0.0 < r[0] && r[0] <= r[1]) {
                return Err(Error::Config(format!(
                    "speed range for {name} must satisfy 0 < min <= max, got {r:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Where objects spawn relative to the road. Lateral lane slots start at
/// `lane_min_m` from the road center (the ego's lane stays empty) and step
/// outward by `slot_width_m` up to `lane_max_m`, alternating sides. Each
/// object gets a slot of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpawnLayout {
    pub lane_min_m: f64,
    pub lane_max_m: f64,
    pub slot_width_m: f64,
    /// Objects start within this distance, forward or backward, of the
    /// ego's start along the road.
    pub longitudinal_span_m: f64,
}

impl Default for SpawnLayout {
    fn default() -> Self {
        SpawnLayout {
            lane_min_m: 3.5,
            lane_max_m: 24.0,
            slot_width_m: 2.2,
            longitudinal_span_m: 40.0,
        }
    }
}

impl SpawnLayout {
    fn validate(&self) -> Result<()> {
        let ok = self.lane_min_m.is_finite()
            && self.lane_max_m.is_finite()
            && self.slot_width_m.is_finite()
            && self.longitudinal_span_m.is_finite()
            && self.lane_min_m > 0.0
            && self.lane_max_m >= self.lane_min_m
            && self.slot_width_m > 0.0
            && self.longitudinal_span_m > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid spawn layout {self:?}")));
        }
        Ok(())
    }

    /// Lateral slot offsets, alternating sides, nearest first.
    fn slots(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut magnitude = self.lane_min_m;
        while magnitude <= self.lane_max_m {
            out.push(magnitude);
            out.push(-magnitude);
            magnitude += self.slot_width_m;
        }
        out
    }
}

/// Noise model of the detector stub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorStubConfig {
    /// Gaussian position noise std per axis, meters.
    pub position_noise_m: f64,
    /// Gaussian yaw noise std, radians.
    pub yaw_noise_rad: f64,
    /// Probability a visible object produces no detection in a frame.
    pub drop_probability: f64,
}

impl Default for DetectorStubConfig {
    fn default() -> Self {
        DetectorStubConfig {
            position_noise_m: 0.1,
            yaw_noise_rad: 0.02,
            drop_probability: 0.02,
        }
    }
}

impl DetectorStubConfig {
    fn validate(&self) -> Result<()> {
        if !(self.position_noise_m.is_finite() && self.position_noise_m >= 0.0) {
            return Err(Error::Config(
                "position_noise_m must be finite and >= 0".into(),
            ));
        }
        if !(self.yaw_noise_rad.is_finite() && self.yaw_noise_rad >= 0.0) {
            return Err(Error::Config(
                "yaw_noise_rad must be finite and >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::Config(format!(
                "drop_probability must be in [0, 1], got {}",
                self.drop_probability
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub scene_id: String,
    pub seed: u64,
    pub duration_s: f64,
    pub frame_rate_hz: f64,
    /// Key frames start once this many prior frames exist; must match the
    /// checker's history depth for key frames to be verifiable.
    pub history_k: usize,
    /// Every `key_frame_stride`-th frame after warm-up is a key frame.
    pub key_frame_stride: usize,
    pub ego_speed_mps: f64,
    /// Road direction in the world frame; `None` draws one per scene.
    pub road_heading_rad: Option<f64>,
    /// Fraction of vehicles and bikes driving against the ego's direction.
    pub oncoming_fraction: f64,
    pub census: ClassCensus,
    pub speeds: ClassSpeeds,
    pub spawn: SpawnLayout,
    /// Per-object size scale is drawn from `1 +- size_jitter`.
    pub size_jitter: f64,
    /// When set, objects change heading every this many seconds (by up to
    /// `heading_jitter_rad`); otherwise they hold one straight segment.
    /// Heading changes may move objects out of their lanes, so overlap-free
    /// ground truth is only guaranteed without segments.
    pub segment_duration_s: Option<f64>,
    pub heading_jitter_rad: f64,
    /// True planar range within which the detector sees objects, meters.
    pub detection_range_m: f64,
    pub detector: DetectorStubConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            scene_id: "scene".to_string(),
            seed: 7,
            duration_s: 35.0,
            frame_rate_hz: 2.0,
            history_k: 20,
            key_frame_stride: 1,
            ego_speed_mps: 5.0,
            road_heading_rad: None,
            oncoming_fraction: 0.3,
            census: ClassCensus::default(),
            speeds: ClassSpeeds::default(),
            spawn: SpawnLayout::default(),
            size_jitter: 0.1,
            segment_duration_s: None,
            heading_jitter_rad: 0.6,
            detection_range_m: 30.0,
            detector: DetectorStubConfig::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::Config("frame_rate_hz must be positive".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        let frames = (self.duration_s * self.frame_rate_hz).round() as usize;
        if frames < self.history_k + 1 {
            return Err(Error::Config(format!(
                "scene yields {} frames but history depth {} needs at least {} \
                 for one key frame",
                frames + 1,
                self.history_k,
                self.history_k + 1
            )));
        }
        if self.history_k < 2 {
            return Err(Error::Config("history_k must be at least 2".into()));
        }
        if self.key_frame_stride == 0 {
            return Err(Error::Config("key_frame_stride must be at least 1".into()));
        }
        if !(self.ego_speed_mps.is_finite() && self.ego_speed_mps >= 0.0) {
            return Err(Error::Config(
                "ego_speed_mps must be finite and >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.oncoming_fraction) {
            return Err(Error::Config("oncoming_fraction must be in [0, 1]".into()));
        }
        if !(self.size_jitter.is_finite() && (0.0..1.0).contains(&self.size_jitter)) {
            return Err(Error::Config("size_jitter must be in [0, 1)".into()));
        }
        if let Some(d) = self.segment_duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Config("segment_duration_s must be positive".into()));
            }
        }
        if !(self.heading_jitter_rad.is_finite() && self.heading_jitter_rad >= 0.0) {
            return Err(Error::Config(
                "heading_jitter_rad must be finite and >= 0".into(),
            ));
        }
        if !(self.detection_range_m.is_finite() && self.detection_range_m > 0.0) {
            return Err(Error::Config("detection_range_m must be positive".into()));
        }
        if self.census.total() == 0 {
            return Err(Error::Config(
                "census must place at least one object".into(),
            ));
        }
        if let Some(h) = self.road_heading_rad {
            if !h.is_finite() {
                return Err(Error::Config("road_heading_rad must be finite".into()));
            }
        }
        self.speeds.validate()?;
        self.spawn.validate()?;
        self.detector.validate()?;
        let slots = self.spawn.slots().len();
        if self.census.total() > slots {
            return Err(Error::Config(format!(
                "census places {} objects but the spawn layout has only {slots} lane slots",
                self.census.total()
            )));
        }
        Ok(())
    }
}

/// One piece of a piecewise-constant-velocity trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySegment {
    pub t_start: f64,
    pub start: [f64; 2],
    pub velocity: [f64; 2],
    pub yaw: f64,
}

/// A simulated object and its full trajectory, world frame.
#[derive(Debug, Clone)]
pub struct GroundTruthObject {
    pub object_key: String,
    pub class: ObjectClass,
    pub size: [f64; 3],
    /// Non-empty, ascending in `t_start`, starting at 0.
    pub segments: Vec<TrajectorySegment>,
}

impl GroundTruthObject {
    /// World pose and velocity at time `t`.
    pub fn state_at(&self, t: f64) -> (Pose2, [f64; 2]) {
        let mut seg = &self.segments[0];
        for s in &self.segments {
            if s.t_start <= t {
                seg = s;
            } else {
                break;
            }
        }
        let dt = t - seg.t_start;
        let pose = Pose2::new(
            seg.start[0] + seg.velocity[0] * dt,
            seg.start[1] + seg.velocity[1] * dt,
            seg.yaw,
        );
        (pose, seg.velocity)
    }
}

fn build_objects(
    config: &SceneConfig,
    rng: &mut ChaCha8Rng,
    road_heading: f64,
) -> Vec<GroundTruthObject> {
    let (sin_r, cos_r) = road_heading.sin_cos();
    let dir = [cos_r, sin_r];
    let perp = [-sin_r, cos_r];

    let mut slots = config.spawn.slots();
    slots.shuffle(rng);

    let mut classes = Vec::with_capacity(config.census.total());
    classes.extend(std::iter::repeat_n(
        ObjectClass::Vehicle,
        config.census.vehicle,
    ));
    classes.extend(std::iter::repeat_n(
        ObjectClass::Pedestrian,
        config.census.pedestrian,
    ));
    classes.extend(std::iter::repeat_n(ObjectClass::Bike, config.census.bike));
    classes.extend(std::iter::repeat_n(
        ObjectClass::Others,
        config.census.others,
    ));
    classes.shuffle(rng);

    let mut objects = Vec::with_capacity(classes.len());
    for (i, class) in classes.into_iter().enumerate() {
        // Fixed draw order per object keeps logs reproducible.
        let speed_range = config.speeds.range_for(class);
        let speed = rng.gen_range(speed_range[0]..=speed_range[1]);
        let oncoming = match class {
            ObjectClass::Vehicle | ObjectClass::Bike => rng.gen_bool(config.oncoming_fraction),
            _ => rng.gen_bool(0.5),
        };
        let along =
            rng.gen_range(-config.spawn.longitudinal_span_m..=config.spawn.longitudinal_span_m);
        let scale = 1.0 + rng.gen_range(-config.size_jitter..=config.size_jitter);

        let lateral = slots[i];
        let heading = if oncoming {
            normalize_yaw(road_heading + std::f64::consts::PI)
        } else {
            road_heading
        };
        let prior = class_size_prior(class);
        let start = [
            along * dir[0] + lateral * perp[0],
            along * dir[1] + lateral * perp[1],
        ];

        let mut segments = Vec::new();
        let mut seg_start = start;
        let mut seg_heading = heading;
        let mut t_start = 0.0;
        loop {
            let (sin_h, cos_h) = seg_heading.sin_cos();
            segments.push(TrajectorySegment {
                t_start,
                start: seg_start,
                velocity: [speed * cos_h, speed * sin_h],
                yaw: seg_heading,
            });
            let Some(seg_len) = config.segment_duration_s else {
                break;
            };
            let t_next = t_start + seg_len;
            if t_next >= config.duration_s {
                break;
            }
            let last = segments.last().unwrap();
            seg_start = [
                last.start[0] + last.velocity[0] * seg_len,
                last.start[1] + last.velocity[1] * seg_len,
            ];
            seg_heading = normalize_yaw(
                seg_heading + rng.gen_range(-config.heading_jitter_rad..=config.heading_jitter_rad),
            );
            t_start = t_next;
        }

        objects.push(GroundTruthObject {
            object_key: format!("obj-{i:02}"),
            class,
            size: [prior[0] * scale, prior[1] * scale, prior[2] * scale],
            segments,
        });
    }
    objects
}

/// Generates one scene as a frame log.
///
/// Determinism: two calls with equal configs produce identical records.
/// Scene layout and detector noise use independent RNG streams, both derived
/// from `seed`.
pub fn generate_scene(config: &SceneConfig) -> Result<Vec<FrameRecord>> {
    config.validate()?;

    let mut layout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    layout_rng.set_stream(0);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_rng.set_stream(1);

    let road_heading = match config.road_heading_rad {
        Some(h) => normalize_yaw(h),
        None => layout_rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    };
    let objects = build_objects(config, &mut layout_rng, road_heading);

    let position_noise = Normal::new(0.0, config.detector.position_noise_m)
        .map_err(|e| Error::Config(format!("position noise: {e}")))?;
    let yaw_noise = Normal::new(0.0, config.detector.yaw_noise_rad)
        .map_err(|e| Error::Config(format!("yaw noise: {e}")))?;

    let dt = 1.0 / config.frame_rate_hz;
    let n_frames = (config.duration_s * config.frame_rate_hz).round() as u64 + 1;
    let (sin_r, cos_r) = road_heading.sin_cos();

    let mut records = Vec::with_capacity(n_frames as usize);
    for f in 0..n_frames {
        let t = f as f64 * dt;
        let ego = Pose2::new(
            config.ego_speed_mps * t * cos_r,
            config.ego_speed_mps * t * sin_r,
            road_heading,
        );
        let is_key_frame = f >= config.history_k as u64
            && (f - config.history_k as u64).is_multiple_of(config.key_frame_stride as u64);

        let mut ground_truth = Vec::with_capacity(objects.len());
        let mut detections = Vec::new();
        for obj in &objects {
            let (pose_w, vel_w) = obj.state_at(t);
            ground_truth.push(GroundTruthRecord {
                object_key: obj.object_key.clone(),
                class: obj.class,
                pose: pose_w.into(),
                size: obj.size,
                velocity: vel_w,
                extra: Default::default(),
            });

            // Visibility is decided on true range so detections cannot
            // flicker at the boundary from noise alone.
            let local = ego_transform(pose_w, ego);
            if local.x.hypot(local.y) > config.detection_range_m {
                continue;
            }
            let drop: f64 = noise_rng.gen();
            let nx = position_noise.sample(&mut noise_rng);
            let ny = position_noise.sample(&mut noise_rng);
            let nyaw = yaw_noise.sample(&mut noise_rng);
            let conf: f64 = noise_rng.gen();
            if drop < config.detector.drop_probability {
                continue;
            }
            detections.push(DetectionRecord {
                detection_id: obj.object_key.clone(),
                class: obj.class,
                box3d: Box3Record {
                    cx: local.x + nx,
                    cy: local.y + ny,
                    cz: obj.size[2] / 2.0,
                    length: obj.size[0],
                    width: obj.size[1],
                    height: obj.size[2],
                    yaw: normalize_yaw(local.yaw + nyaw),
                },
                confidence: 0.70 + 0.29 * conf,
                provenance: Provenance::Simulated,
                extra: Default::default(),
            });
        }

        records.push(FrameRecord {
            schema_version: SCHEMA_VERSION,
            scene_id: config.scene_id.clone(),
            frame_index: f,
            is_key_frame,
            timestamp: t,
            ego: PoseRecord::from(ego),
            ground_truth,
            detections,
            attack: None,
            extra: Default::default(),
        });
    }
    Ok(records)
}

/// Generates `count` scenes with ids `{base.scene_id}-000` onward, each on
/// its own derived seed, concatenated into one log.
pub fn generate_scenes(base: &SceneConfig, count: usize) -> Result<Vec<FrameRecord>> {
    if count == 0 {
        return Err(Error::Config("scene count must be at least 1".into()));
    }
    let mut records = Vec::new();
    for i in 0..count {
        let cfg = SceneConfig {
            scene_id: format!("{}-{i:03}", base.scene_id),
            seed: base
                .seed
                .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            ..base.clone()
        };
        records.extend(generate_scene(&cfg)?);
    }
    Ok(records)
}

/// Which frames of each scene the injector attacks.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackFrames {
    /// Every key frame.
    KeyFrames,
    /// Explicit frame indices, applied per scene. Every listed index must
    /// exist in every scene.
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub target_class: ObjectClass,
    /// Ghost center distance from the ego, meters (min, max).
    pub distance_range: [f64; 2],
    /// Ghost lateral offset is uniform in `+-lateral_jitter_m`.
    pub lateral_jitter_m: f64,
    pub frames: AttackFrames,
    /// Consecutive log records a successful ghost persists for.
    pub duration_frames: usize,
    /// Spoofed points the modeled attacker spends per ghost; bounded by
    /// what relay hardware can inject in one scan.
    pub point_budget: u32,
    /// Probability an injection attempt actually fools the detector.
    pub success_rate: f64,
    /// Ghost box size; `None` uses the class prior.
    pub ghost_size: Option<[f64; 3]>,
}

/// Hard ceiling on spoofed points per object for the modeled attacker.
pub const MAX_POINT_BUDGET: u32 = 200;

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            target_class: ObjectClass::Vehicle,
            distance_range: [5.0, 8.0],
            lateral_jitter_m: 1.0,
            frames: AttackFrames::KeyFrames,
            duration_frames: 1,
            point_budget: 200,
            success_rate: 0.97,
            ghost_size: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_class == ObjectClass::Background {
            return Err(Error::Config("target_class cannot be background".into()));
        }
        let [dmin, dmax] = self.distance_range;
        if !(dmin.is_finite() && dmax.is_finite() && 0.0 < dmin && dmin <= dmax) {
            return Err(Error::Config(format!(
                "distance_range must satisfy 0 < min <= max, got {:?}",
                self.distance_range
            )));
        }
        if !(self.lateral_jitter_m.is_finite()
            && self.lateral_jitter_m >= 0.0
            && self.lateral_jitter_m < dmin)
        {
            return Err(Error::Config(
                "lateral_jitter_m must be >= 0 and smaller than the minimum distance".into(),
            ));
        }
        if self.duration_frames == 0 {
            return Err(Error::Config("duration_frames must be at least 1".into()));
        }
        if self.point_budget == 0 || self.point_budget > MAX_POINT_BUDGET {
            return Err(Error::Config(format!(
                "point_budget must be in [1, {MAX_POINT_BUDGET}], got {}",
                self.point_budget
            )));
        }
        if !(0.0..=1.0).contains(&self.success_rate) {
            return Err(Error::Config("success_rate must be in [0, 1]".into()));
        }
        if let Some(s) = self.ghost_size {
            if !s.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(Error::Config("ghost_size must be positive".into()));
            }
        }
        if let AttackFrames::Explicit(list) = &self.frames {
            if list.is_empty() {
                return Err(Error::Config("explicit attack frame list is empty".into()));
            }
        }
        Ok(())
    }
}

/// Plants ghost detections in a log and returns the attacked copy.
///
/// Each attacked frame gets at most one new ghost with a fresh
/// `ghost-`-prefixed id and an [`AttackRecord`] describing the attempt.
/// Failed attempts (per `success_rate`) leave a record with no injected ids.
/// Ghosts hold a fixed world position over `duration_frames` records; while
/// one is active no new attack starts in that scene.
pub fn inject_attack(
    records: &[FrameRecord],
    attack: &AttackConfig,
    seed: u64,
) -> Result<Vec<FrameRecord>> {
    attack.validate()?;
    for r in records {
        if r.attack.is_some() {
            return Err(Error::Data(format!(
                "frame {} of scene '{}' already carries an attack record",
                r.frame_index, r.scene_id
            )));
        }
        for d in &r.detections {
            if d.detection_id.starts_with(GHOST_ID_PREFIX) {
                return Err(Error::Data(format!(
                    "detection id '{}' collides with the reserved ghost prefix",
                    d.detection_id
                )));
            }
        }
    }

    let mut out = records.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ghost_size = attack
        .ghost_size
        .unwrap_or_else(|| class_size_prior(attack.target_class));

    // Contiguous scene ranges; the log reader guarantees contiguity for
    // logs that came from disk, so only group here.
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for i in 1..=out.len() {
        if i == out.len() || out[i].scene_id != out[start].scene_id {
            ranges.push((start, i));
            start = i;
        }
    }

    for (scene_ord, (lo, hi)) in ranges.into_iter().enumerate() {
        let scene = &mut out[lo..hi];
        if let AttackFrames::Explicit(list) = &attack.frames {
            for f in list {
                if !scene.iter().any(|r| r.frame_index == *f) {
                    return Err(Error::Data(format!(
                        "attack frame {f} does not exist in scene '{}'",
                        scene[0].scene_id
                    )));
                }
            }
        }

        let mut i = 0;
        while i < scene.len() {
            let initiate = match &attack.frames {
                AttackFrames::KeyFrames => scene[i].is_key_frame,
                AttackFrames::Explicit(list) => list.contains(&scene[i].frame_index),
            };
            if !initiate {
                i += 1;
                continue;
            }

            // Fixed draw order per attempt, success or not.
            let success_draw: f64 = rng.gen();
            let distance = rng.gen_range(attack.distance_range[0]..=attack.distance_range[1]);
            let lateral = rng.gen_range(-attack.lateral_jitter_m..=attack.lateral_jitter_m);
            let conf: f64 = rng.gen();
            let success = success_draw < attack.success_rate;

            if !success {
                scene[i].attack = Some(AttackRecord {
                    target_class: attack.target_class,
                    attempted: 1,
                    injected_ids: vec![],
                    point_budget: attack.point_budget,
                    extra: Default::default(),
                });
                i += 1;
                continue;
            }

            let key = format!(
                "{GHOST_ID_PREFIX}{scene_ord:02}-{:05}",
                scene[i].frame_index
            );
            let forward = (distance * distance - lateral * lateral).sqrt();
            let ghost_world =
                ego_untransform(Pose2::new(forward, lateral, 0.0), scene[i].ego.to_pose());
            let span = attack.duration_frames.min(scene.len() - i);
            for record in scene[i..i + span].iter_mut() {
                let local = ego_transform(ghost_world, record.ego.to_pose());
                record.detections.push(DetectionRecord {
                    detection_id: key.clone(),
                    class: attack.target_class,
                    box3d: Box3Record {
                        cx: local.x,
                        cy: local.y,
                        cz: ghost_size[2] / 2.0,
                        length: ghost_size[0],
                        width: ghost_size[1],
                        height: ghost_size[2],
                        yaw: local.yaw,
                    },
                    confidence: 0.70 + 0.29 * conf,
                    provenance: Provenance::Injected,
                    extra: Default::default(),
                });
                record.attack = Some(AttackRecord {
                    target_class: attack.target_class,
                    attempted: 1,
                    injected_ids: vec![key.clone()],
                    point_budget: attack.point_budget,
                    extra: Default::default(),
                });
            }
            i += span;
        }
    }
    Ok(out)
}
