//! Lane-frame trajectories, labeled samples, and their on-disk formats.
//!
//! Coordinates follow a straight-road convention: `x_long` grows along the
//! driving direction, `x_lat` grows to the right across lanes, lane `0` is
//! the leftmost lane and dividing line `k` sits at `x_lat = k * lane_width`.

mod dataset;
mod ngsim;
mod scene_io;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

pub(crate) use dataset::verified_body;
pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_VERSION};
pub use ngsim::{ingest_ngsim, parse_ngsim, NgsimColumns, NgsimOptions};
pub use scene_io::{load_scenes, read_scenes, save_scenes, write_scenes};

use crate::error::{Error, Result};

pub const FRAME_RATE_HZ: f64 = 10.0;
pub const FRAME_DT: f64 = 1.0 / FRAME_RATE_HZ;
/// Observation window, 2 s.
pub const OBSERVATION_FRAMES: usize = 20;
/// Prediction (labeling) window, 4 s.
pub const PREDICTION_FRAMES: usize = 40;
/// Samples of an LC event start this many frames (8 s) before the crossing.
pub const EVENT_HISTORY_FRAMES: usize = 80;
pub const NEIGHBOR_SLOTS: usize = 8;
pub const MANEUVER_DIM: usize = 6;
pub const CONNECTION_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub vehicle_id: i64,
    pub frame: i64,
    pub lane_id: i32,
    pub x_long: f64,
    pub x_lat: f64,
    pub v_long: f64,
    pub v_lat: f64,
    /// Heading relative to the lane direction, positive to the right.
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoadGeometry {
    lane_count: usize,
    lane_width: f64,
}

impl RoadGeometry {
    pub fn new(lane_count: usize, lane_width: f64) -> Result<Self> {
        if lane_count < 2 {
            return Err(Error::validation(format!(
                "road needs at least 2 lanes, got {}",
                lane_count
            )));
        }
        if !(lane_width.is_finite() && lane_width > 0.0) {
            return Err(Error::validation(format!(
                "lane width must be positive, got {}",
                lane_width
            )));
        }
        Ok(RoadGeometry {
            lane_count,
            lane_width,
        })
    }

    pub fn lane_count(&self) -> usize {
        self.lane_count
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn lane_center(&self, lane: i32) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Lane containing `x_lat`, or `None` off the road.
    pub fn lane_of(&self, x_lat: f64) -> Option<i32> {
        let lane = (x_lat / self.lane_width).floor();
        if lane >= 0.0 && lane < self.lane_count as f64 {
            Some(lane as i32)
        } else {
            None
        }
    }

    pub fn has_lane(&self, lane: i32) -> bool {
        lane >= 0 && (lane as usize) < self.lane_count
    }
}

/// Immutable collection of frame-contiguous trajectories on one road.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    road: RoadGeometry,
    tracks: BTreeMap<i64, Vec<VehicleState>>,
    frames: BTreeMap<i64, Vec<VehicleState>>,
}

impl Scene {
    pub fn empty(road: RoadGeometry) -> Self {
        Scene {
            road,
            tracks: BTreeMap::new(),
            frames: BTreeMap::new(),
        }
    }

    /// Builds a scene, validating every state against the road.
    pub fn from_states(road: RoadGeometry, states: impl IntoIterator<Item = VehicleState>) -> Result<Self> {
        let mut tracks: BTreeMap<i64, Vec<VehicleState>> = BTreeMap::new();
        for s in states {
            validate_state(&road, &s)?;
            tracks.entry(s.vehicle_id).or_default().push(s);
        }
        let mut frames: BTreeMap<i64, Vec<VehicleState>> = BTreeMap::new();
        for (id, track) in tracks.iter_mut() {
            track.sort_by_key(|s| s.frame);
            for pair in track.windows(2) {
                if pair[1].frame == pair[0].frame {
                    return Err(Error::validation(format!(
                        "vehicle {} appears twice in frame {}",
                        id, pair[0].frame
                    )));
                }
                if pair[1].frame != pair[0].frame + 1 {
                    return Err(Error::validation(format!(
                        "vehicle {} has a gap between frames {} and {}",
                        id, pair[0].frame, pair[1].frame
                    )));
                }
            }
            for s in track.iter() {
                frames.entry(s.frame).or_default().push(*s);
            }
        }
        Ok(Scene {
            road,
            tracks,
            frames,
        })
    }

    pub fn road(&self) -> &RoadGeometry {
        &self.road
    }

    pub fn frame_rate_hz(&self) -> f64 {
        FRAME_RATE_HZ
    }

    pub fn vehicle_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn vehicle_ids(&self) -> impl Iterator<Item = i64> + '_ {
        self.tracks.keys().copied()
    }

    pub fn track(&self, vehicle_id: i64) -> Option<&[VehicleState]> {
        self.tracks.get(&vehicle_id).map(|t| t.as_slice())
    }

    pub fn tracks(&self) -> impl Iterator<Item = (i64, &[VehicleState])> {
        self.tracks.iter().map(|(id, t)| (*id, t.as_slice()))
    }

    pub fn state(&self, vehicle_id: i64, frame: i64) -> Option<&VehicleState> {
        let track = self.tracks.get(&vehicle_id)?;
        let first = track.first()?.frame;
        if frame < first {
            return None;
        }
        track.get((frame - first) as usize)
    }

    /// All vehicles present in `frame`, ordered by vehicle id.
    pub fn vehicles_at(&self, frame: i64) -> &[VehicleState] {
        self.frames.get(&frame).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn frame_numbers(&self) -> impl Iterator<Item = i64> + '_ {
        self.frames.keys().copied()
    }

    pub fn states(&self) -> impl Iterator<Item = &VehicleState> {
        self.tracks.values().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}

fn validate_state(road: &RoadGeometry, s: &VehicleState) -> Result<()> {
    let values = [s.x_long, s.x_lat, s.v_long, s.v_lat, s.theta];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "state of vehicle {} at frame {}",
            s.vehicle_id, s.frame
        )));
    }
    if s.frame < 0 {
        return Err(Error::validation(format!(
            "negative frame {} for vehicle {}",
            s.frame, s.vehicle_id
        )));
    }
    if !road.has_lane(s.lane_id) {
        return Err(Error::validation(format!(
            "lane {} of vehicle {} at frame {} is not on a {}-lane road",
            s.lane_id,
            s.vehicle_id,
            s.frame,
            road.lane_count()
        )));
    }
    if road.lane_of(s.x_lat) != Some(s.lane_id) {
        return Err(Error::validation(format!(
            "vehicle {} at frame {}: x_lat {} does not lie in lane {}",
            s.vehicle_id, s.frame, s.x_lat, s.lane_id
        )));
    }
    if s.theta.abs() >= FRAC_PI_2 {
        return Err(Error::validation(format!(
            "heading {} of vehicle {} at frame {} is not below pi/2",
            s.theta, s.vehicle_id, s.frame
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    LaneKeep = 0,
    ChangeLeft = 1,
    ChangeRight = 2,
}

impl Behavior {
    pub const ALL: [Behavior; 3] = [Behavior::LaneKeep, Behavior::ChangeLeft, Behavior::ChangeRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_lane_change(self) -> bool {
        self != Behavior::LaneKeep
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Behavior::LaneKeep => "LK",
            Behavior::ChangeLeft => "LCL",
            Behavior::ChangeRight => "LCR",
        }
    }
}

/// Time to lane change. `Never` marks samples with no crossing ahead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ttlc {
    Seconds(f64),
    Never,
}

impl Ttlc {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Ttlc::Seconds(s) => Some(s),
            Ttlc::Never => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Ttlc::Seconds(_))
    }

    /// `f64::INFINITY` for `Never`; for comparisons only.
    pub fn as_f64(self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }

    pub fn from_frames(frames: i64) -> Self {
        Ttlc::Seconds(frames as f64 / FRAME_RATE_HZ)
    }
}

/// One vehicle's 20-frame observation, columns
/// `(x_lat, x_long, d_lat_clc, v_long, v_lat, theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManeuverSequence(pub [[f64; MANEUVER_DIM]; OBSERVATION_FRAMES]);

impl ManeuverSequence {
    pub fn zeros() -> Self {
        ManeuverSequence([[0.0; MANEUVER_DIM]; OBSERVATION_FRAMES])
    }

    pub fn rows(&self) -> &[[f64; MANEUVER_DIM]; OBSERVATION_FRAMES] {
        &self.0
    }

    pub fn column(&self, c: usize) -> [f64; OBSERVATION_FRAMES] {
        let mut out = [0.0; OBSERVATION_FRAMES];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row[c];
        }
        out
    }

    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }

    pub fn all_finite(&self) -> bool {
        self.flat().all(f64::is_finite)
    }
}

/// The six-element relative-dynamics feature of an interaction pair:
/// `(dx_long, dx_lat, target v_long, target v_lat, neighbor v_long, neighbor v_lat)`.
pub type ConnectionFeature = [f64; CONNECTION_DIM];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborEntry {
    /// `None` for a virtual vehicle.
    pub vehicle_id: Option<i64>,
    pub features: ManeuverSequence,
    pub connection: ConnectionFeature,
}

/// One prediction instance: a target's observation, its eight neighbor
/// slots, the behavior label and the time to the associated crossing.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub scene_id: u32,
    /// LC event or LK track this sample belongs to.
    pub event_id: u64,
    pub vehicle_id: i64,
    /// Decision frame `t` (last observed frame).
    pub frame: i64,
    pub label: Behavior,
    /// Time from `frame` to the event's crossing; `Never` for LK tracks.
    pub ttlc: Ttlc,
    pub target: ManeuverSequence,
    pub neighbors: [NeighborEntry; NEIGHBOR_SLOTS],
}

#[cfg(test)]
pub(crate) mod tests;
