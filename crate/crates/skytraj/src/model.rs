//! Core data model: oriented box states, trajectories, and track tables.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Point2, Vector2};

use crate::angle;
use crate::error::{Error, Result};

/// Object classes emitted by the upstream tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VehicleClass {
    Car,
    Tricycle,
    Van,
    Truck,
    Bus,
    Trailer,
    Pedestrian,
    Moped,
}

/// Coarse grouping used by filtering and conflict analytics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassGroup {
    /// Motorized vehicles.
    Mv,
    /// Vulnerable road users.
    Vru,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 8] = [
        VehicleClass::Car,
        VehicleClass::Tricycle,
        VehicleClass::Van,
        VehicleClass::Truck,
        VehicleClass::Bus,
        VehicleClass::Trailer,
        VehicleClass::Pedestrian,
        VehicleClass::Moped,
    ];

    pub fn group(self) -> ClassGroup {
        match self {
            VehicleClass::Car
            | VehicleClass::Tricycle
            | VehicleClass::Van
            | VehicleClass::Truck
            | VehicleClass::Bus
            | VehicleClass::Trailer => ClassGroup::Mv,
            VehicleClass::Pedestrian | VehicleClass::Moped => ClassGroup::Vru,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Tricycle => "tricycle",
            VehicleClass::Van => "van",
            VehicleClass::Truck => "truck",
            VehicleClass::Bus => "bus",
            VehicleClass::Trailer => "trailer",
            VehicleClass::Pedestrian => "pedestrian",
            VehicleClass::Moped => "moped",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        VehicleClass::ALL
            .into_iter()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coordinate unit of a trajectory's centers and box dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Pixel,
    Meter,
}

impl Unit {
    pub fn name(self) -> &'static str {
        match self {
            Unit::Pixel => "pixel",
            Unit::Meter => "meter",
        }
    }
}

/// The pixel-space observation a state was derived from, kept through
/// georeferencing so exports can show raw tracker output next to world values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelObservation {
    pub center: Point2<f64>,
    pub length: f64,
    pub width: f64,
    pub yaw_rad: f64,
}

/// One oriented bounding-box state of a tracked object.
///
/// `heading_rad`, `speed_mps` and `accel_mps2` are populated by the smoothing
/// stage; before that they are `None`. `confidence` is `None` exactly for
/// states produced by gap interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedBoxState {
    pub frame: i64,
    pub time_s: f64,
    pub center: Point2<f64>,
    pub length: f64,
    pub width: f64,
    /// Box orientation in `[-pi, pi)`, measured from +x toward +y.
    pub yaw_rad: f64,
    /// Direction of travel in `[-pi, pi)`; set by smoothing.
    pub heading_rad: Option<f64>,
    pub speed_mps: Option<f64>,
    pub accel_mps2: Option<f64>,
    pub confidence: Option<f64>,
    pub interpolated: bool,
    pub source_px: Option<PixelObservation>,
}

impl OrientedBoxState {
    /// A plain observed state with only geometry filled in.
    pub fn observed(
        frame: i64,
        time_s: f64,
        center: Point2<f64>,
        length: f64,
        width: f64,
        yaw_rad: f64,
        confidence: f64,
    ) -> Self {
        OrientedBoxState {
            frame,
            time_s,
            center,
            length,
            width,
            yaw_rad: angle::wrap(yaw_rad),
            heading_rad: None,
            speed_mps: None,
            accel_mps2: None,
            confidence: Some(confidence),
            interpolated: false,
            source_px: None,
        }
    }

    /// Velocity vector from speed and heading, if smoothing has run.
    pub fn velocity(&self) -> Option<Vector2<f64>> {
        match (self.speed_mps, self.heading_rad) {
            (Some(s), Some(h)) => Some(Vector2::new(s * h.cos(), s * h.sin())),
            _ => None,
        }
    }
}

/// A single object's track: states strictly ordered by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub track_id: u64,
    pub class: VehicleClass,
    pub unit: Unit,
    pub frame_rate_hz: f64,
    states: Vec<OrientedBoxState>,
}

impl Trajectory {
    pub fn new(
        track_id: u64,
        class: VehicleClass,
        unit: Unit,
        frame_rate_hz: f64,
        states: Vec<OrientedBoxState>,
    ) -> Result<Self> {
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidTrajectory {
                track_id,
                message: format!("frame rate must be positive, got {frame_rate_hz}"),
            });
        }
        let mut t = Trajectory { track_id, class, unit, frame_rate_hz, states: Vec::new() };
        for s in states {
            t.push(s)?;
        }
        Ok(t)
    }

    /// Append a state, enforcing ordering and geometry invariants.
    pub fn push(&mut self, mut s: OrientedBoxState) -> Result<()> {
        let fail = |message: String| Error::InvalidTrajectory { track_id: self.track_id, message };
        if let Some(last) = self.states.last() {
            if s.frame <= last.frame {
                return Err(fail(format!(
                    "frames must strictly increase ({} then {})",
                    last.frame, s.frame
                )));
            }
        }
        if !(s.length > 0.0 && s.width > 0.0) || !s.length.is_finite() || !s.width.is_finite() {
            return Err(fail(format!(
                "box dimensions must be positive and finite at frame {} (length {}, width {})",
                s.frame, s.length, s.width
            )));
        }
        if !s.center.x.is_finite() || !s.center.y.is_finite() || !s.yaw_rad.is_finite() {
            return Err(fail(format!("non-finite pose at frame {}", s.frame)));
        }
        if s.interpolated && s.confidence.is_some() {
            return Err(fail(format!(
                "interpolated state at frame {} must not carry a confidence",
                s.frame
            )));
        }
        s.yaw_rad = angle::wrap(s.yaw_rad);
        if let Some(h) = s.heading_rad {
            s.heading_rad = Some(angle::wrap(h));
        }
        self.states.push(s);
        Ok(())
    }

    pub fn states(&self) -> &[OrientedBoxState] {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn first(&self) -> Option<&OrientedBoxState> {
        self.states.first()
    }

    pub fn last(&self) -> Option<&OrientedBoxState> {
        self.states.last()
    }

    pub fn group(&self) -> ClassGroup {
        self.class.group()
    }

    /// Frame period in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    /// State at an exact frame index, if present.
    pub fn state_at_frame(&self, frame: i64) -> Option<&OrientedBoxState> {
        self.states
            .binary_search_by_key(&frame, |s| s.frame)
            .ok()
            .map(|i| &self.states[i])
    }

    /// Rebuild with the same identity but new states.
    pub fn with_states(&self, states: Vec<OrientedBoxState>) -> Result<Trajectory> {
        Trajectory::new(self.track_id, self.class, self.unit, self.frame_rate_hz, states)
    }

    /// Mutate states in place through a closure, then re-validate ordering.
    pub fn map_states<F>(&self, f: F) -> Result<Trajectory>
    where
        F: FnMut(OrientedBoxState) -> OrientedBoxState,
    {
        let states: Vec<_> = self.states.iter().cloned().map(f).collect();
        self.with_states(states)
    }

    /// Covered time span `[first, last]` in seconds, or `None` when empty.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => Some((a.time_s, b.time_s)),
            _ => None,
        }
    }

    /// Duration as covered frame count times the frame period, so a track of
    /// `n` states with no gaps lasts `n / rate` seconds.
    pub fn duration_s(&self) -> Result<f64> {
        let (first, last) = match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => (a.frame, b.frame),
            _ => return Err(Error::EmptyTrajectory),
        };
        Ok((last - first + 1) as f64 / self.frame_rate_hz)
    }

    /// Straight-line distance between first and last center, meters.
    pub fn net_displacement_m(&self) -> Result<f64> {
        if self.unit != Unit::Meter {
            return Err(Error::UnitMismatch { expected: Unit::Meter.name(), got: self.unit.name() });
        }
        let (first, last) = match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::EmptyTrajectory),
        };
        Ok((last.center - first.center).norm())
    }

    /// Mean detector confidence over observed (non-interpolated) states.
    pub fn mean_confidence(&self) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in &self.states {
            if let Some(c) = s.confidence {
                if !s.interpolated {
                    sum += c;
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::NoObservations);
        }
        Ok(sum / n as f64)
    }

    /// Sum of segment lengths along the smoothed centers, meters.
    pub fn path_length_m(&self) -> Result<f64> {
        if self.unit != Unit::Meter {
            return Err(Error::UnitMismatch { expected: Unit::Meter.name(), got: self.unit.name() });
        }
        if self.states.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        Ok(self
            .states
            .windows(2)
            .map(|w| (w[1].center - w[0].center).norm())
            .sum())
    }

    /// Number of observed (non-interpolated) states.
    pub fn observed_count(&self) -> usize {
        self.states.iter().filter(|s| !s.interpolated).count()
    }
}

/// All trajectories of one scene, keyed by track id. Shares one unit and one
/// frame rate across every member.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackTable {
    pub scene_id: String,
    pub unit: Unit,
    pub frame_rate_hz: f64,
    trajectories: BTreeMap<u64, Trajectory>,
}

impl TrackTable {
    pub fn new(scene_id: impl Into<String>, unit: Unit, frame_rate_hz: f64) -> Result<Self> {
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        Ok(TrackTable { scene_id: scene_id.into(), unit, frame_rate_hz, trajectories: BTreeMap::new() })
    }

    pub fn insert(&mut self, traj: Trajectory) -> Result<()> {
        if traj.unit != self.unit {
            return Err(Error::UnitMismatch { expected: self.unit.name(), got: traj.unit.name() });
        }
        if (traj.frame_rate_hz - self.frame_rate_hz).abs() > 1e-9 {
            return Err(Error::InvalidTrajectory {
                track_id: traj.track_id,
                message: format!(
                    "frame rate {} differs from table rate {}",
                    traj.frame_rate_hz, self.frame_rate_hz
                ),
            });
        }
        if traj.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if self.trajectories.contains_key(&traj.track_id) {
            return Err(Error::InvalidTrajectory {
                track_id: traj.track_id,
                message: "duplicate track id".into(),
            });
        }
        self.trajectories.insert(traj.track_id, traj);
        Ok(())
    }

    pub fn remove(&mut self, track_id: u64) -> Option<Trajectory> {
        self.trajectories.remove(&track_id)
    }

    pub fn get(&self, track_id: u64) -> Option<&Trajectory> {
        self.trajectories.get(&track_id)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Trajectories in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.trajectories.keys().copied()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    /// Smallest unused id, for tracks created by gap splitting.
    pub fn next_free_id(&self) -> u64 {
        self.trajectories.keys().next_back().map_or(0, |k| k + 1)
    }

    /// Total state count across all trajectories.
    pub fn state_count(&self) -> usize {
        self.trajectories.values().map(|t| t.len()).sum()
    }

    /// Rebuild an empty table with the same scene id / unit / rate.
    pub fn like(&self) -> TrackTable {
        TrackTable {
            scene_id: self.scene_id.clone(),
            unit: self.unit,
            frame_rate_hz: self.frame_rate_hz,
            trajectories: BTreeMap::new(),
        }
    }
}
