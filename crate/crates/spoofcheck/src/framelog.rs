//! Frame logs: the JSON Lines interchange format for scenes, with one frame
//! record per line. Unknown fields are preserved on read and written back
//! out, so logs can round-trip through tools built against newer schemas.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::align::{Detection, Provenance};
use crate::bev::{normalize_yaw, Obb3, ObjectClass, Pose2};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl From<Pose2> for PoseRecord {
    fn from(p: Pose2) -> Self {
        PoseRecord {
            x: p.x,
            y: p.y,
            yaw: p.yaw,
        }
    }
}

impl PoseRecord {
    pub fn to_pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3Record {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
}

impl Box3Record {
    pub fn to_obb3(&self) -> Obb3 {
        Obb3 {
            center: [self.cx, self.cy, self.cz],
            size: [self.length, self.width, self.height],
            yaw: normalize_yaw(self.yaw),
        }
    }

    pub fn from_obb3(b: &Obb3) -> Self {
        Box3Record {
            cx: b.center[0],
            cy: b.center[1],
            cz: b.center[2],
            length: b.size[0],
            width: b.size[1],
            height: b.size[2],
            yaw: b.yaw,
        }
    }
}

/// A simulated object's true state, in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub object_key: String,
    pub class: ObjectClass,
    pub pose: PoseRecord,
    /// Footprint (length, width) and height, meters.
    pub size: [f64; 3],
    pub velocity: [f64; 2],
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// One detector output, in the ego frame of its frame record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub detection_id: String,
    pub class: ObjectClass,
    pub box3d: Box3Record,
    pub confidence: f64,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn default_provenance() -> Provenance {
    Provenance::Ingested
}

impl DetectionRecord {
    pub fn to_detection(&self) -> Result<Detection> {
        let detection = Detection {
            detection_id: self.detection_id.clone(),
            class: self.class,
            box3: self.box3d.to_obb3(),
            confidence: self.confidence,
            provenance: self.provenance,
        };
        detection.validate()?;
        Ok(detection)
    }

    pub fn from_detection(d: &Detection) -> Self {
        DetectionRecord {
            detection_id: d.detection_id.clone(),
            class: d.class,
            box3d: Box3Record::from_obb3(&d.box3),
            confidence: d.confidence,
            provenance: d.provenance,
            extra: Map::new(),
        }
    }
}

/// Attack bookkeeping attached to frames an injector touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub target_class: ObjectClass,
    /// Injection attempts acting on this frame (0 when the attempt against
    /// this frame failed its success draw).
    pub attempted: u32,
    /// Detection ids of ghosts present in this frame.
    pub injected_ids: Vec<String>,
    /// Maximum spoofed points the modeled attacker may place per object.
    pub point_budget: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// One frame of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub schema_version: u32,
    pub scene_id: String,
    pub frame_index: u64,
    pub is_key_frame: bool,
    /// Seconds since scene start.
    pub timestamp: f64,
    /// Ego pose in the world frame.
    pub ego: PoseRecord,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthRecord>,
    pub detections: Vec<DetectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackRecord>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Contiguous per-scene slices of a validated log, in file order.
pub fn scenes(records: &[FrameRecord]) -> Vec<(&str, &[FrameRecord])> {
    let mut out: Vec<(&str, &[FrameRecord])> = Vec::new();
    let mut start = 0usize;
    for i in 0..records.len() {
        if records[i].scene_id != records[start].scene_id {
            out.push((&records[start].scene_id, &records[start..i]));
            start = i;
        }
    }
    if start < records.len() {
        out.push((&records[start].scene_id, &records[start..]));
    }
    out
}

/// Reads and validates a frame log. Errors carry the 1-based line number.
///
/// Validation: parseable JSON per line, supported `schema_version`, frames
/// of a scene contiguous with strictly increasing `frame_index` and
/// `timestamp`, finite ego pose, and well-formed detections.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>> {
    let mut records: Vec<FrameRecord> = Vec::new();
    // scene_id -> (last_frame_index, last_timestamp, closed)
    let mut scene_state: std::collections::BTreeMap<String, (u64, f64, bool)> =
        std::collections::BTreeMap::new();
    let mut current_scene: Option<String> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord = serde_json::from_str(&line).map_err(|e| Error::LogParse {
            line: line_no,
            message: e.to_string(),
        })?;
        let fail = |message: String| Error::LogParse {
            line: line_no,
            message,
        };

        if record.schema_version != SCHEMA_VERSION {
            return Err(fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                record.schema_version
            )));
        }
        if !record.timestamp.is_finite() {
            return Err(fail("timestamp must be finite".into()));
        }
        if !record.ego.to_pose().is_finite() {
            return Err(fail("ego pose must be finite".into()));
        }
        for d in &record.detections {
            d.to_detection()
                .map_err(|e| fail(format!("detection '{}': {e}", d.detection_id)))?;
        }

        if current_scene.as_deref() != Some(record.scene_id.as_str()) {
            if let Some(prev) = current_scene.take() {
                scene_state.get_mut(&prev).expect("seen scene").2 = true;
            }
            current_scene = Some(record.scene_id.clone());
        }
        match scene_state.get_mut(&record.scene_id) {
            None => {
                scene_state.insert(
                    record.scene_id.clone(),
                    (record.frame_index, record.timestamp, false),
                );
            }
            Some((_, _, true)) => {
                return Err(fail(format!(
                    "scene '{}' reappears after other scenes; scenes must be contiguous",
                    record.scene_id
                )));
            }
            Some((last_frame, last_ts, false)) => {
                if record.frame_index <= *last_frame {
                    return Err(fail(format!(
                        "frame_index {} follows {} in scene '{}'; must be strictly increasing",
                        record.frame_index, last_frame, record.scene_id
                    )));
                }
                if record.timestamp <= *last_ts {
                    return Err(fail(format!(
                        "timestamp {} follows {} in scene '{}'; must be strictly increasing",
                        record.timestamp, last_ts, record.scene_id
                    )));
                }
                *last_frame = record.frame_index;
                *last_ts = record.timestamp;
            }
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_log_path(path: &Path) -> Result<Vec<FrameRecord>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open log {}: {e}", path.display())))?;
    read_log(std::io::BufReader::new(file))
}

/// Writes records as JSON Lines. Output is byte-deterministic for equal
/// inputs: field order is fixed and maps are sorted.
pub fn write_log<W: Write>(mut writer: W, records: &[FrameRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)
            .map_err(|e| Error::Data(format!("cannot serialize frame record: {e}")))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_log_path(path: &Path, records: &[FrameRecord]) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Data(format!("cannot create log {}: {e}", path.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    write_log(&mut writer, records)?;
    writer.flush()?;
    Ok(())
}
