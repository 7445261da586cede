//! Temporal-consistency checking for 3D object detections.
//!
//! LiDAR spoofing attacks can plant a ghost obstacle in a single scan, but
//! a ghost has no past: nothing in the preceding frames moves in a way that
//! explains its sudden presence. This crate checks each detection against a
//! bird's-eye-view prediction of the scene rendered purely from earlier
//! frames, and flags detections whose footprint the history cannot account
//! for.
//!
//! The pieces, bottom up:
//!
//! - [`bev`]: the ego-centered grid, oriented boxes, and rasterization.
//! - [`tracks`]: per-object observation history with bounded depth.
//! - [`kalman`] and [`predict`]: constant-velocity extrapolation (direct or
//!   Kalman-filtered) and rendering of the predicted scene as per-cell class
//!   labels.
//! - [`align`]: projecting current-frame detections onto the grid and
//!   tagging them with range regions.
//! - [`cmcs`]: the cell-match decision rule (benign, spoofed, unverifiable).
//! - [`pipeline`]: the frame loop; predictions are always rendered before a
//!   frame is folded into history, so no detection vouches for itself.
//! - [`sim`]: a synthetic scene generator and the ghost injector used to
//!   exercise the checker end to end.
//! - [`metrics`]: match ratios, attack success / detection success rates,
//!   and a wall-clock benchmark.
//! - [`framelog`] and [`config`]: the JSON Lines interchange format and the
//!   TOML run configuration.
//!
//! Everything is deterministic under a fixed seed: simulation, injection,
//! checking, and evaluation produce byte-identical outputs run to run.

pub mod align;
pub mod bev;
pub mod cmcs;
pub mod config;
pub mod error;
pub mod framelog;
pub mod kalman;
pub mod metrics;
pub mod pipeline;
pub mod predict;
pub mod sim;
pub mod tracks;

pub use error::{Error, Result};
