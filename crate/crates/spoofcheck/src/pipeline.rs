//! The end-to-end check over frame logs: builds track history scene by
//! scene, renders the predicted grid for each checked frame, aligns that
//! frame's detections, and emits per-detection verdicts.
//!
//! The order of operations inside a frame is the core guarantee: the
//! predicted map is rendered from history *before* the frame's detections
//! are folded into the store, so no detection can contribute evidence to its
//! own verdict.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align, Provenance, Region};
use crate::bev::{ego_untransform, GridSpec, ObjectClass, Pose2};
use crate::cmcs::{check_frame, CmcsConfig, Decision};
use crate::error::{Error, Result};
use crate::framelog::{FrameRecord, SCHEMA_VERSION};
use crate::predict::{render_prediction, PredictorConfig};
use crate::tracks::{Observation, TrackStore, TrackStoreConfig};

/// Which frames of a log get a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFrames {
    /// Only frames marked `is_key_frame`.
    Key,
    /// Every frame.
    All,
}

/// Everything the checker needs, bundled.
#[derive(Debug, Clone)]
pub struct CheckSettings {
    pub grid: GridSpec,
    pub tracking: TrackStoreConfig,
    pub predictor: PredictorConfig,
    pub region: crate::align::RegionConfig,
    pub cmcs: CmcsConfig,
    pub frames: CheckFrames,
    /// Track in the world frame using the log's ego poses, and re-express
    /// predictions in the current ego frame at render time. Without this,
    /// tracking happens in the raw sensor frame and ego motion smears into
    /// object motion.
    pub ego_compensation: bool,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            grid: GridSpec::new(0.25, 32.0).expect("default grid is valid"),
            tracking: TrackStoreConfig::default(),
            predictor: PredictorConfig::default(),
            region: crate::align::RegionConfig::default(),
            cmcs: CmcsConfig::default(),
            frames: CheckFrames::Key,
            ego_compensation: true,
        }
    }
}

impl CheckSettings {
    pub fn validate(&self) -> Result<()> {
        self.tracking.validate()?;
        self.predictor.validate()?;
        self.region.validate()?;
        Ok(())
    }
}

/// One verdict row of the verdict log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub detection_id: String,
    pub class: ObjectClass,
    pub region: Region,
    pub provenance: Provenance,
    pub decision: Decision,
    pub plurality_class: ObjectClass,
    /// Predicted labels tallied under the detection footprint.
    pub class_counts: BTreeMap<ObjectClass, usize>,
    pub match_fraction: f64,
}

/// Verdicts for one checked frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameVerdicts {
    pub schema_version: u32,
    pub scene_id: String,
    pub frame_index: u64,
    pub timestamp: f64,
    pub verdicts: Vec<VerdictRecord>,
}

/// Wall-clock stage costs for one fully processed frame, seconds.
/// `prediction_s` covers rendering plus folding the frame into history;
/// the stages are disjoint sub-intervals of `total_s`, so their sum never
/// exceeds it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameTiming {
    pub frame_index: u64,
    pub prediction_s: f64,
    pub alignment_s: f64,
    pub detection_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct SceneCheckResult {
    pub scene_id: String,
    pub verdicts: Vec<FrameVerdicts>,
    /// One entry per checked frame that had enough history for the full
    /// pipeline (render, align, decide).
    pub timings: Vec<FrameTiming>,
}

/// Checks one scene's records, which must all share a `scene_id` and carry
/// strictly increasing frame indices.
///
/// A checked frame with fewer than `history_k` prior frames yields
/// `Unverifiable` verdicts for all its detections: there is not enough
/// history to vouch for anything, and silently treating such detections as
/// benign would hand an attacker the first frames of every drive.
pub fn check_scene(records: &[FrameRecord], settings: &CheckSettings) -> Result<SceneCheckResult> {
    let Some(first) = records.first() else {
        return Err(Error::Data("cannot check an empty scene".into()));
    };
    let scene_id = first.scene_id.clone();
    if records.iter().any(|r| r.scene_id != scene_id) {
        return Err(Error::Data(
            "check_scene takes one scene at a time; split the log first".into(),
        ));
    }
    settings.validate()?;

    let mut store = TrackStore::new(settings.tracking.clone())?;
    let mut out = Vec::new();
    let mut timings = Vec::new();

    for (frames_ingested, record) in records.iter().enumerate() {
        let frame_start = Instant::now();
        let mut prediction_s = 0.0;
        let mut alignment_s = 0.0;
        let mut detection_s = 0.0;

        let mut detections = Vec::with_capacity(record.detections.len());
        for d in &record.detections {
            detections.push(d.to_detection()?);
        }

        let checked = match settings.frames {
            CheckFrames::All => true,
            CheckFrames::Key => record.is_key_frame,
        };
        let mut frame_verdicts: Option<Vec<VerdictRecord>> = None;
        let mut full_pipeline = false;

        if checked {
            if frames_ingested < settings.tracking.history_k {
                let aligned = align(detections.clone(), &settings.grid, &settings.region);
                frame_verdicts = Some(
                    aligned
                        .iter()
                        .map(|a| VerdictRecord {
                            detection_id: a.detection.detection_id.clone(),
                            class: a.detection.class,
                            region: a.region,
                            provenance: a.detection.provenance,
                            decision: Decision::Unverifiable,
                            plurality_class: ObjectClass::Background,
                            class_counts: BTreeMap::new(),
                            match_fraction: 0.0,
                        })
                        .collect(),
                );
            } else {
                full_pipeline = true;
                let t0 = Instant::now();
                let target_ego = settings.ego_compensation.then(|| record.ego.to_pose());
                let map = render_prediction(
                    &store,
                    record.timestamp,
                    target_ego,
                    &settings.grid,
                    &settings.predictor,
                );
                prediction_s += t0.elapsed().as_secs_f64();

                let t1 = Instant::now();
                let aligned = align(detections.clone(), &settings.grid, &settings.region);
                alignment_s += t1.elapsed().as_secs_f64();

                let t2 = Instant::now();
                let verdicts = check_frame(&aligned, &map, &settings.cmcs);
                frame_verdicts = Some(
                    aligned
                        .iter()
                        .zip(verdicts)
                        .map(|(a, v)| VerdictRecord {
                            detection_id: v.detection_id,
                            class: a.detection.class,
                            region: a.region,
                            provenance: a.detection.provenance,
                            decision: v.decision,
                            plurality_class: v.plurality_class,
                            class_counts: v.class_counts,
                            match_fraction: v.match_fraction,
                        })
                        .collect(),
                );
                detection_s += t2.elapsed().as_secs_f64();
            }
        }

        // Fold the frame into history only now, after the verdicts exist.
        let t3 = Instant::now();
        let ego = record.ego.to_pose();
        let observations: Vec<Observation> = detections
            .iter()
            .map(|d| {
                let local = Pose2::new(d.box3.center[0], d.box3.center[1], d.box3.yaw);
                let pose = if settings.ego_compensation {
                    ego_untransform(local, ego)
                } else {
                    local
                };
                Observation {
                    frame_index: record.frame_index,
                    timestamp: record.timestamp,
                    pose,
                    size: [d.box3.size[0], d.box3.size[1]],
                    class: d.class,
                    object_key: d.detection_id.clone(),
                }
            })
            .collect();
        store.ingest_frame(record.frame_index, &observations)?;
        prediction_s += t3.elapsed().as_secs_f64();

        if let Some(verdicts) = frame_verdicts {
            out.push(FrameVerdicts {
                schema_version: SCHEMA_VERSION,
                scene_id: record.scene_id.clone(),
                frame_index: record.frame_index,
                timestamp: record.timestamp,
                verdicts,
            });
        }
        if full_pipeline {
            timings.push(FrameTiming {
                frame_index: record.frame_index,
                prediction_s,
                alignment_s,
                detection_s,
                total_s: frame_start.elapsed().as_secs_f64(),
            });
        }
    }

    Ok(SceneCheckResult {
        scene_id,
        verdicts: out,
        timings,
    })
}

/// Checks a whole log, scene by scene. `jobs` controls scene-level
/// parallelism: 1 runs inline, 0 uses one thread per core, anything else
/// caps the pool at that many threads. Results are in scene order
/// regardless, so output is deterministic.
pub fn run_check(
    records: &[FrameRecord],
    settings: &CheckSettings,
    jobs: usize,
) -> Result<Vec<SceneCheckResult>> {
    let groups = crate::framelog::scenes(records);
    if groups.is_empty() {
        return Err(Error::Data("log contains no frames".into()));
    }
    if jobs == 1 {
        groups
            .iter()
            .map(|(_, recs)| check_scene(recs, settings))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| {
            groups
                .par_iter()
                .map(|(_, recs)| check_scene(recs, settings))
                .collect()
        })
    }
}

/// Flattens scene results into the verdict rows they carry, in scene order.
pub fn collect_verdicts(results: &[SceneCheckResult]) -> Vec<FrameVerdicts> {
    results
        .iter()
        .flat_map(|r| r.verdicts.iter().cloned())
        .collect()
}

/// Writes verdicts as JSON Lines, one checked frame per line.
pub fn write_verdicts<W: Write>(mut writer: W, frames: &[FrameVerdicts]) -> Result<()> {
    for frame in frames {
        serde_json::to_writer(&mut writer, frame)
            .map_err(|e| Error::Data(format!("cannot serialize verdicts: {e}")))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_verdicts_path(path: &Path, frames: &[FrameVerdicts]) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    write_verdicts(&mut writer, frames)?;
    use std::io::Write as _;
    writer.flush()?;
    Ok(())
}

/// Reads a verdict log produced by [`write_verdicts`]. Errors carry 1-based
/// line numbers.
pub fn read_verdicts<R: BufRead>(reader: R) -> Result<Vec<FrameVerdicts>> {
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: FrameVerdicts = serde_json::from_str(&line).map_err(|e| Error::LogParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if frame.schema_version != SCHEMA_VERSION {
            return Err(Error::LogParse {
                line: i + 1,
                message: format!(
                    "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                    frame.schema_version
                ),
            });
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn read_verdicts_path(path: &Path) -> Result<Vec<FrameVerdicts>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_verdicts(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{
        generate_scene, inject_attack, AttackConfig, DetectorStubConfig, SceneConfig,
    };

    fn scene_config() -> SceneConfig {
        SceneConfig {
            scene_id: "p".into(),
            seed: 3,
            duration_s: 15.0,
            history_k: 4,
            // Full visibility from frame 0, so no object is ever seen for
            // the first time mid-scene (a fresh track has no history and
            // would correctly draw a false alarm).
            detection_range_m: 1000.0,
            detector: DetectorStubConfig {
                position_noise_m: 0.0,
                yaw_noise_rad: 0.0,
                drop_probability: 0.0,
            },
            ..SceneConfig::default()
        }
    }

    fn settings() -> CheckSettings {
        CheckSettings {
            tracking: TrackStoreConfig {
                history_k: 4,
                ..TrackStoreConfig::default()
            },
            ..CheckSettings::default()
        }
    }

    #[test]
    fn clean_scene_yields_benign_verdicts_on_key_frames() {
        let records = generate_scene(&scene_config()).unwrap();
        let result = check_scene(&records, &settings()).unwrap();
        let key_frames = records.iter().filter(|r| r.is_key_frame).count();
        assert_eq!(result.verdicts.len(), key_frames);
        let mut benign = 0;
        for frame in &result.verdicts {
            for v in &frame.verdicts {
                match v.decision {
                    Decision::Benign => benign += 1,
                    Decision::Spoofed => panic!(
                        "genuine detection {} at frame {} flagged spoofed",
                        v.detection_id, frame.frame_index
                    ),
                    // Only detections outside the grid may be unverifiable
                    // on a frame with full history.
                    Decision::Unverifiable => assert!(
                        v.class_counts.is_empty(),
                        "{} at frame {} is unverifiable with a footprint",
                        v.detection_id,
                        frame.frame_index
                    ),
                }
            }
        }
        assert!(benign > 100, "only {benign} benign verdicts");
    }

    #[test]
    fn ghosts_are_flagged_spoofed() {
        let records = generate_scene(&scene_config()).unwrap();
        let attacked = inject_attack(&records, &AttackConfig::default(), 9).unwrap();
        let result = check_scene(&attacked, &settings()).unwrap();
        let mut ghosts = 0;
        for frame in &result.verdicts {
            for v in &frame.verdicts {
                if v.provenance == Provenance::Injected {
                    assert_eq!(v.decision, Decision::Spoofed);
                    assert_eq!(v.region, Region::FrontNear);
                    ghosts += 1;
                }
            }
        }
        assert!(ghosts > 10, "only {ghosts} ghost verdicts");
    }

    #[test]
    fn short_history_key_frames_are_unverifiable() {
        let records = generate_scene(&scene_config()).unwrap();
        let all = CheckSettings {
            frames: CheckFrames::All,
            ..settings()
        };
        let result = check_scene(&records, &all).unwrap();
        assert_eq!(result.verdicts.len(), records.len());
        for frame in &result.verdicts {
            let short = frame.frame_index < 4;
            for v in &frame.verdicts {
                if short {
                    assert_eq!(v.decision, Decision::Unverifiable);
                    assert!(v.class_counts.is_empty());
                } else if v.decision == Decision::Unverifiable {
                    // With full history only off-grid detections (empty
                    // footprint) stay unverifiable.
                    assert!(v.class_counts.is_empty());
                }
            }
            if !short {
                let benign = frame
                    .verdicts
                    .iter()
                    .filter(|v| v.decision == Decision::Benign)
                    .count();
                assert!(
                    benign > 0,
                    "frame {} has no benign verdicts",
                    frame.frame_index
                );
            }
        }
    }

    #[test]
    fn timings_cover_only_full_pipeline_frames() {
        let records = generate_scene(&scene_config()).unwrap();
        let result = check_scene(&records, &settings()).unwrap();
        let key_frames = records.iter().filter(|r| r.is_key_frame).count();
        assert_eq!(result.timings.len(), key_frames);
        for t in &result.timings {
            let stage_sum = t.prediction_s + t.alignment_s + t.detection_s;
            assert!(stage_sum <= t.total_s + 1e-9);
        }
    }

    #[test]
    fn run_check_is_deterministic_and_parallel_agrees_with_serial() {
        let mut records = generate_scene(&scene_config()).unwrap();
        let more = generate_scene(&SceneConfig {
            scene_id: "q".into(),
            seed: 8,
            ..scene_config()
        })
        .unwrap();
        records.extend(more);

        let serial = run_check(&records, &settings(), 1).unwrap();
        let parallel = run_check(&records, &settings(), 4).unwrap();
        let serial_verdicts = collect_verdicts(&serial);
        let parallel_verdicts = collect_verdicts(&parallel);
        assert_eq!(serial_verdicts, parallel_verdicts);

        let mut a = Vec::new();
        write_verdicts(&mut a, &serial_verdicts).unwrap();
        let mut b = Vec::new();
        write_verdicts(&mut b, &parallel_verdicts).unwrap();
        assert_eq!(a, b, "serialized verdicts must be byte-identical");
    }

    #[test]
    fn verdict_log_round_trips() {
        let records = generate_scene(&scene_config()).unwrap();
        let result = check_scene(&records, &settings()).unwrap();
        let mut buf = Vec::new();
        write_verdicts(&mut buf, &result.verdicts).unwrap();
        let back = read_verdicts(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, result.verdicts);
    }

    #[test]
    fn verdict_reader_rejects_garbage_with_line_numbers() {
        let err = read_verdicts(std::io::Cursor::new(b"{}\n".to_vec())).unwrap_err();
        assert!(matches!(err, Error::LogParse { line: 1, .. }));
    }

    #[test]
    fn empty_log_is_a_data_error() {
        let err = run_check(&[], &settings(), 1).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }
}
