//! skytraj turns aerial multi-object-tracking output into georeferenced,
//! smoothed, conflict-annotated intersection trajectories.
//!
//! The pipeline runs in fixed stages:
//!
//! 1. **georef** — undistort pixel detections, map them through a
//!    ground-control homography to WGS84, then into a local metric frame.
//! 2. **smooth** — Savitzky-Golay pre-smoothing, kinematic gap interpolation,
//!    Rauch-Tung-Striebel smoothing, and yaw refinement.
//! 3. **filter** — two-stage duplicate and noise removal.
//! 4. **conflicts** — time-to-collision scan, gap-time validation, and
//!    conflict classification.
//! 5. **match** — turning-movement assignment, signal-phase lookup, and
//!    red-light-running detection.
//! 6. **metrics** — arrival rates, occupancy heatmaps, violation rates, and
//!    deterministic CSV export.
//!
//! Each stage is an ordinary library call (see [`pipeline`]); the `skytraj`
//! binary and the `examples/` directory are thin wrappers over those calls.

pub mod angle;
pub mod config;
pub mod conflict;
pub mod dedup;
pub mod error;
pub mod export;
pub mod georef;
pub mod ingest;
pub mod kinematics;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod semantic;
pub mod ssm;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ClassGroup, OrientedBoxState, TrackTable, Trajectory, Unit, VehicleClass};
