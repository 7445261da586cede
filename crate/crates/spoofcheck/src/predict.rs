//! Motion prediction: extrapolates each track to a target time and renders
//! the expected scene onto the grid as per-cell class labels.
//!
//! Rendering always works from history only. Callers render the expected
//! state of frame `f` from observations up to `f - 1` and fold frame `f`
//! into the store afterwards, so a detection can never vouch for itself.

use serde::{Deserialize, Serialize};

use crate::bev::{ego_transform, normalize_yaw, GridSpec, ObbBev, ObjectClass, Pose2};
use crate::error::{Error, Result};
use crate::kalman::CvKalman;
use crate::tracks::{Track, TrackStore};

/// Motion model used to extrapolate tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorMode {
    /// Finite-difference constant velocity.
    ConstantVelocity,
    /// Constant-velocity Kalman filter over the track history.
    Kalman,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub mode: PredictorMode,
    /// Minimum observations a track needs before it is rendered.
    pub min_observations: usize,
    /// Estimate velocity by least squares over the last few observations
    /// instead of the last two (constant-velocity mode only).
    pub smoothing: bool,
    /// White-acceleration intensity for the Kalman filter, m/s^2.
    pub process_noise_q: f64,
    /// Measurement noise std for the Kalman filter, m.
    pub measurement_noise_r: f64,
    /// Below this speed (m/s) heading falls back to the last observed yaw.
    pub min_speed_for_heading: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            mode: PredictorMode::ConstantVelocity,
            min_observations: 2,
            smoothing: false,
            process_noise_q: 0.5,
            measurement_noise_r: 0.1,
            min_speed_for_heading: 0.1,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_observations < 2 {
            return Err(Error::Config(format!(
                "min_observations must be at least 2, got {}",
                self.min_observations
            )));
        }
        if !(self.process_noise_q.is_finite() && self.process_noise_q >= 0.0) {
            return Err(Error::Config(
                "process_noise_q must be finite and non-negative".into(),
            ));
        }
        if !(self.measurement_noise_r.is_finite() && self.measurement_noise_r > 0.0) {
            return Err(Error::Config(
                "measurement_noise_r must be finite and positive".into(),
            ));
        }
        if !(self.min_speed_for_heading.is_finite() && self.min_speed_for_heading >= 0.0) {
            return Err(Error::Config(
                "min_speed_for_heading must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Where a track is expected to be at the target time, in the same frame the
/// track was built in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub pose: Pose2,
    pub velocity: [f64; 2],
}

/// Number of trailing observations used by least-squares smoothing.
const SMOOTHING_WINDOW: usize = 5;

fn heading_for(velocity: [f64; 2], fallback_yaw: f64, min_speed: f64) -> f64 {
    let speed = velocity[0].hypot(velocity[1]);
    if speed > min_speed {
        normalize_yaw(velocity[1].atan2(velocity[0]))
    } else {
        fallback_yaw
    }
}

/// Constant-velocity extrapolation of `track` to `t_target`. Velocity comes
/// from the last two observations, or a least-squares fit over the last
/// [`SMOOTHING_WINDOW`] when smoothing is on. The predicted position is
/// always anchored at the last observation.
pub fn predict_cv(track: &Track, t_target: f64, config: &PredictorConfig) -> Result<Prediction> {
    let obs: Vec<_> = track.observations().collect();
    if obs.len() < 2 {
        return Err(Error::Data(format!(
            "track '{}' has {} observation(s); constant-velocity needs 2",
            track.key(),
            obs.len()
        )));
    }
    let last = obs[obs.len() - 1];

    let velocity = if config.smoothing {
        let window = &obs[obs.len().saturating_sub(SMOOTHING_WINDOW)..];
        least_squares_velocity(window)
    } else {
        let prev = obs[obs.len() - 2];
        let dt = last.timestamp - prev.timestamp;
        debug_assert!(dt > 0.0, "store enforces increasing timestamps");
        [
            (last.pose.x - prev.pose.x) / dt,
            (last.pose.y - prev.pose.y) / dt,
        ]
    };

    let dt = t_target - last.timestamp;
    let pose = Pose2::new(
        last.pose.x + velocity[0] * dt,
        last.pose.y + velocity[1] * dt,
        heading_for(velocity, last.pose.yaw, config.min_speed_for_heading),
    );
    Ok(Prediction { pose, velocity })
}

/// Per-axis least-squares slope of position against time. Window timestamps
/// are distinct, so the denominator is positive.
fn least_squares_velocity(window: &[&crate::tracks::Observation]) -> [f64; 2] {
    let n = window.len() as f64;
    let t_last = window[window.len() - 1].timestamp;
    let mean_t = window.iter().map(|o| o.timestamp - t_last).sum::<f64>() / n;
    let mean_x = window.iter().map(|o| o.pose.x).sum::<f64>() / n;
    let mean_y = window.iter().map(|o| o.pose.y).sum::<f64>() / n;
    let mut denom = 0.0;
    let mut num_x = 0.0;
    let mut num_y = 0.0;
    for o in window {
        let dt = (o.timestamp - t_last) - mean_t;
        denom += dt * dt;
        num_x += dt * (o.pose.x - mean_x);
        num_y += dt * (o.pose.y - mean_y);
    }
    [num_x / denom, num_y / denom]
}

/// Runs a constant-velocity Kalman filter over the track's history and
/// extrapolates to `t_target`. Returns the prediction along with the
/// filter's covariance at the target time.
pub fn predict_kf(
    track: &Track,
    t_target: f64,
    config: &PredictorConfig,
) -> Result<(Prediction, nalgebra::Matrix4<f64>)> {
    let mut obs = track.observations();
    let first = obs
        .next()
        .ok_or_else(|| Error::Data(format!("track '{}' has no observations", track.key())))?;
    let mut kf = CvKalman::new(
        first.timestamp,
        first.pose.x,
        first.pose.y,
        config.process_noise_q,
        config.measurement_noise_r,
    )?;
    for o in obs {
        kf.predict_to(o.timestamp)?;
        kf.update(o.pose.x, o.pose.y)?;
    }
    let (state, cov) = kf.peek(t_target)?;
    let velocity = [state[2], state[3]];
    let pose = Pose2::new(
        state[0],
        state[1],
        heading_for(
            velocity,
            track.last().pose.yaw,
            config.min_speed_for_heading,
        ),
    );
    Ok((Prediction { pose, velocity }, cov))
}

/// Extrapolates `track` to `t_target` using the configured motion model.
pub fn predict(track: &Track, t_target: f64, config: &PredictorConfig) -> Result<Prediction> {
    match config.mode {
        PredictorMode::ConstantVelocity => predict_cv(track, t_target, config),
        PredictorMode::Kalman => {
            if track.len() < 2 {
                return Err(Error::Data(format!(
                    "track '{}' has {} observation(s); prediction needs 2",
                    track.key(),
                    track.len()
                )));
            }
            predict_kf(track, t_target, config).map(|(p, _)| p)
        }
    }
}

/// Dense per-cell view of the predicted scene: a class label per cell, plus
/// the predicted planar velocity of whatever object claimed the cell.
#[derive(Debug, Clone)]
pub struct PredictedCellMap {
    grid: GridSpec,
    labels: Vec<ObjectClass>,
    velocities: Option<Vec<[f64; 2]>>,
}

impl PredictedCellMap {
    /// An all-background map with no velocity layer.
    pub fn background(grid: GridSpec) -> Self {
        PredictedCellMap {
            grid,
            labels: vec![ObjectClass::Background; grid.cell_count()],
            velocities: None,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn label(&self, idx: crate::bev::CellIndex) -> ObjectClass {
        self.labels[self.grid.flat_index(idx)]
    }

    pub fn labels(&self) -> &[ObjectClass] {
        &self.labels
    }

    /// Velocity recorded at a cell, if the map carries a velocity layer.
    pub fn velocity(&self, idx: crate::bev::CellIndex) -> Option<[f64; 2]> {
        self.velocities
            .as_ref()
            .map(|v| v[self.grid.flat_index(idx)])
    }

    /// Count of cells not labeled background.
    pub fn occupied_cells(&self) -> usize {
        self.labels
            .iter()
            .filter(|c| **c != ObjectClass::Background)
            .count()
    }
}

/// Renders the expected scene at `t_target` from the store's history.
///
/// Tracks with fewer than `min_observations` observations are skipped, as
/// are tracks whose prediction fails. When `target_ego` is given, tracks are
/// assumed to live in the world frame and predictions are re-expressed in
/// that ego pose before rasterization.
///
/// Overlap policy: larger footprints paint first and a painted cell is never
/// overwritten, so where two objects overlap the larger one keeps the
/// contested cells. Ties on footprint size break on ascending track key.
pub fn render_prediction(
    store: &TrackStore,
    t_target: f64,
    target_ego: Option<Pose2>,
    grid: &GridSpec,
    config: &PredictorConfig,
) -> PredictedCellMap {
    struct Painted<'a> {
        key: &'a str,
        class: ObjectClass,
        velocity: [f64; 2],
        footprint: Vec<crate::bev::CellIndex>,
    }

    let mut painted: Vec<Painted> = Vec::new();
    for track in store.tracks() {
        if track.len() < config.min_observations {
            continue;
        }
        let Ok(prediction) = predict(track, t_target, config) else {
            continue;
        };
        let (pose, velocity) = match target_ego {
            Some(ego) => {
                let local = ego_transform(prediction.pose, ego);
                let (sin_e, cos_e) = ego.yaw.sin_cos();
                let v = [
                    prediction.velocity[0] * cos_e + prediction.velocity[1] * sin_e,
                    -prediction.velocity[0] * sin_e + prediction.velocity[1] * cos_e,
                ];
                (local, v)
            }
            None => (prediction.pose, prediction.velocity),
        };
        let footprint = crate::bev::rasterize(
            &ObbBev {
                center: [pose.x, pose.y],
                size: track.last().size,
                yaw: pose.yaw,
            },
            grid,
        );
        if footprint.is_empty() {
            continue;
        }
        painted.push(Painted {
            key: track.key(),
            class: track.class(),
            velocity,
            footprint,
        });
    }

    painted.sort_by(|a, b| {
        b.footprint
            .len()
            .cmp(&a.footprint.len())
            .then_with(|| a.key.cmp(b.key))
    });

    let mut map = PredictedCellMap {
        grid: *grid,
        labels: vec![ObjectClass::Background; grid.cell_count()],
        velocities: Some(vec![[0.0, 0.0]; grid.cell_count()]),
    };
    let velocities = map.velocities.as_mut().expect("just set");
    for p in &painted {
        for idx in &p.footprint {
            let flat = grid.flat_index(*idx);
            if map.labels[flat] == ObjectClass::Background {
                map.labels[flat] = p.class;
                velocities[flat] = p.velocity;
            }
        }
    }
    map
}
