//! Aligns current-frame detections with the grid: projects each detection's
//! box to a cell footprint and tags it with a range region relative to the
//! sensor.

use serde::{Deserialize, Serialize};

use crate::bev::{project_to_bev, rasterize, CellIndex, GridSpec, Obb3, ObjectClass};
use crate::error::{Error, Result};

/// Where a detection came from. `Simulated` and `Injected` exist so
/// evaluation can tell genuine objects from planted ones; logs read from
/// outside sources default to `Ingested`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Injected,
    Ingested,
}

/// One detector output for a frame, in the ego frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub detection_id: String,
    pub class: ObjectClass,
    pub box3: Obb3,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if self.class == ObjectClass::Background {
            return Err(Error::Data(format!(
                "detection '{}' is labeled background",
                self.detection_id
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Data(format!(
                "detection '{}' confidence {} outside [0, 1]",
                self.detection_id, self.confidence
            )));
        }
        self.box3.validate()
    }
}

/// Range bucket relative to the sensor, split at `near_limit_m` ahead of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    FrontNear,
    FrontFar,
    Other,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::FrontNear => "front_near",
            Region::FrontFar => "front_far",
            Region::Other => "other",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    /// Near/far split distance, meters. The boundary itself counts as near.
    pub near_limit_m: f64,
    /// Optional half-angle restriction on what counts as "front"; `None`
    /// means the whole forward half-plane.
    pub cone_half_angle_rad: Option<f64>,
    /// Sensor position in the ego frame.
    pub lidar_offset: [f64; 2],
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            near_limit_m: 8.0,
            cone_half_angle_rad: None,
            lidar_offset: [0.0, 0.0],
        }
    }
}

impl RegionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.near_limit_m.is_finite() && self.near_limit_m > 0.0) {
            return Err(Error::Config(format!(
                "near_limit_m must be positive and finite, got {}",
                self.near_limit_m
            )));
        }
        if let Some(a) = self.cone_half_angle_rad {
            if !(a.is_finite() && a > 0.0 && a <= std::f64::consts::PI) {
                return Err(Error::Config(format!(
                    "cone_half_angle_rad must be in (0, pi], got {a}"
                )));
            }
        }
        if !self.lidar_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("lidar_offset must be finite".into()));
        }
        Ok(())
    }
}

/// Classifies an ego-frame point into a range region.
pub fn classify_region(x: f64, y: f64, config: &RegionConfig) -> Region {
    let dx = x - config.lidar_offset[0];
    let dy = y - config.lidar_offset[1];
    let in_front = match config.cone_half_angle_rad {
        _ if dx <= 0.0 => false,
        None => true,
        Some(half_angle) => dy.atan2(dx).abs() <= half_angle,
    };
    if !in_front {
        return Region::Other;
    }
    if dx.hypot(dy) <= config.near_limit_m {
        Region::FrontNear
    } else {
        Region::FrontFar
    }
}

/// A detection bound to the grid: its cell footprint plus region tag.
/// Detections outside the grid keep an empty footprint; downstream they
/// become unverifiable rather than being dropped.
#[derive(Debug, Clone)]
pub struct AlignedDetection {
    pub detection: Detection,
    pub footprint: Vec<CellIndex>,
    pub region: Region,
}

/// Projects every detection onto the grid. Order is preserved; no detection
/// is dropped. Detections must already be validated.
pub fn align(
    detections: Vec<Detection>,
    grid: &GridSpec,
    config: &RegionConfig,
) -> Vec<AlignedDetection> {
    detections
        .into_iter()
        .map(|detection| {
            let bev = project_to_bev(&detection.box3);
            let footprint = rasterize(&bev, grid);
            let region = classify_region(bev.center[0], bev.center[1], config);
            AlignedDetection {
                detection,
                footprint,
                region,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(id: &str, x: f64, y: f64) -> Detection {
        Detection {
            detection_id: id.to_string(),
            class: ObjectClass::Vehicle,
            box3: Obb3 {
                center: [x, y, 0.8],
                size: [4.5, 1.8, 1.6],
                yaw: 0.0,
            },
            confidence: 0.9,
            provenance: Provenance::Simulated,
        }
    }

    #[test]
    fn region_split_honors_the_near_boundary() {
        let cfg = RegionConfig::default();
        assert_eq!(classify_region(5.0, 0.0, &cfg), Region::FrontNear);
        // Exactly on the limit counts as near.
        assert_eq!(classify_region(8.0, 0.0, &cfg), Region::FrontNear);
        assert_eq!(classify_region(8.01, 0.0, &cfg), Region::FrontFar);
        assert_eq!(classify_region(-0.1, 0.0, &cfg), Region::Other);
        assert_eq!(classify_region(0.0, 3.0, &cfg), Region::Other);
        // Behind on x but near in distance is still Other.
        assert_eq!(classify_region(-2.0, 1.0, &cfg), Region::Other);
    }

    #[test]
    fn region_distance_is_planar_not_axial() {
        let cfg = RegionConfig::default();
        // x = 6 but hypot(6, 6) > 8.
        assert_eq!(classify_region(6.0, 6.0, &cfg), Region::FrontFar);
    }

    #[test]
    fn cone_restriction_narrows_the_front() {
        let cfg = RegionConfig {
            cone_half_angle_rad: Some(std::f64::consts::FRAC_PI_4),
            ..RegionConfig::default()
        };
        assert_eq!(classify_region(5.0, 0.0, &cfg), Region::FrontNear);
        assert_eq!(classify_region(5.0, 4.9, &cfg), Region::FrontNear);
        // 60 degrees off axis falls outside a 45-degree cone.
        assert_eq!(classify_region(3.0, 5.2, &cfg), Region::Other);
    }

    #[test]
    fn lidar_offset_shifts_the_region_origin() {
        let cfg = RegionConfig {
            lidar_offset: [2.0, 0.0],
            ..RegionConfig::default()
        };
        assert_eq!(classify_region(1.0, 0.0, &cfg), Region::Other);
        assert_eq!(classify_region(10.0, 0.0, &cfg), Region::FrontNear);
    }

    #[test]
    fn align_keeps_every_detection_in_order() {
        let grid = GridSpec::new(0.25, 16.0).unwrap();
        let detections = vec![det("a", 5.0, 0.0), det("b", 50.0, 0.0), det("c", -3.0, 1.0)];
        let aligned = align(detections, &grid, &RegionConfig::default());
        assert_eq!(aligned.len(), 3);
        assert_eq!(aligned[0].detection.detection_id, "a");
        assert!(!aligned[0].footprint.is_empty());
        assert_eq!(aligned[0].region, Region::FrontNear);
        // Off-grid detection keeps an empty footprint but is not dropped.
        assert_eq!(aligned[1].detection.detection_id, "b");
        assert!(aligned[1].footprint.is_empty());
        assert_eq!(aligned[1].region, Region::FrontFar);
        assert_eq!(aligned[2].region, Region::Other);
    }

    #[test]
    fn align_footprint_matches_direct_rasterization() {
        let grid = GridSpec::new(0.25, 16.0).unwrap();
        let d = det("a", 6.0, -1.0);
        let expected = rasterize(&project_to_bev(&d.box3), &grid);
        let aligned = align(vec![d], &grid, &RegionConfig::default());
        assert_eq!(aligned[0].footprint, expected);
    }

    #[test]
    fn detection_validation_rejects_bad_fields() {
        let mut d = det("a", 1.0, 0.0);
        d.confidence = 1.5;
        assert!(d.validate().is_err());
        let mut d = det("b", 1.0, 0.0);
        d.class = ObjectClass::Background;
        assert!(d.validate().is_err());
        let mut d = det("c", 1.0, 0.0);
        d.box3.size = [0.0, 1.0, 1.0];
        assert!(d.validate().is_err());
    }

    #[test]
    fn region_config_validation() {
        assert!(RegionConfig::default().validate().is_ok());
        assert!(RegionConfig {
            near_limit_m: 0.0,
            ..RegionConfig::default()
        }
        .validate()
        .is_err());
        assert!(RegionConfig {
            cone_half_angle_rad: Some(4.0),
            ..RegionConfig::default()
        }
        .validate()
        .is_err());
    }
}
