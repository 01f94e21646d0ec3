//! Sample assembly: maneuver features, neighbor slots, connection features
//! and crossing-based labels.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{
    Behavior, ConnectionFeature, LabeledSample, ManeuverSequence, NeighborEntry, Scene, Ttlc,
    VehicleState, EVENT_HISTORY_FRAMES, FRAME_DT, NEIGHBOR_SLOTS, OBSERVATION_FRAMES,
    PREDICTION_FRAMES,
};
use crate::error::{Error, Result};

/// Longitudinal offset of a virtual neighbor, meters.
pub const VIRTUAL_DISTANCE: f64 = 100.0;

/// Semantic position of each of the eight neighbor slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Front,
    Rear,
    LeftClosest,
    LeftFront,
    LeftRear,
    RightClosest,
    RightFront,
    RightRear,
}

impl SlotKind {
    pub const ORDER: [SlotKind; NEIGHBOR_SLOTS] = [
        SlotKind::Front,
        SlotKind::Rear,
        SlotKind::LeftClosest,
        SlotKind::LeftFront,
        SlotKind::LeftRear,
        SlotKind::RightClosest,
        SlotKind::RightFront,
        SlotKind::RightRear,
    ];

    /// Lane offset relative to the target: -1 left, 0 same, +1 right.
    pub fn lane_offset(self) -> i32 {
        match self {
            SlotKind::Front | SlotKind::Rear => 0,
            SlotKind::LeftClosest | SlotKind::LeftFront | SlotKind::LeftRear => -1,
            _ => 1,
        }
    }

    /// Sign of the virtual vehicle's longitudinal offset.
    pub fn virtual_direction(self) -> f64 {
        match self {
            SlotKind::Rear | SlotKind::LeftRear | SlotKind::RightRear => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Vehicle(i64),
    Virtual,
}

impl Slot {
    pub fn vehicle_id(self) -> Option<i64> {
        match self {
            Slot::Vehicle(id) => Some(id),
            Slot::Virtual => None,
        }
    }
}

/// Exactly eight slots in [`SlotKind::ORDER`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborSlots(pub [Slot; NEIGHBOR_SLOTS]);

impl NeighborSlots {
    pub fn get(&self, kind: SlotKind) -> Slot {
        self.0[SlotKind::ORDER.iter().position(|k| *k == kind).expect("all kinds listed")]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SlotKind, Slot)> + '_ {
        SlotKind::ORDER.iter().copied().zip(self.0.iter().copied())
    }
}

fn require_state(scene: &Scene, vehicle: i64, frame: i64) -> Result<&VehicleState> {
    scene.state(vehicle, frame).ok_or_else(|| {
        Error::validation(format!("vehicle {} is not present at frame {}", vehicle, frame))
    })
}

/// The 20 x 6 observation ending at `t`, with the frame-`t` lateral and
/// longitudinal position subtracted from the first two columns.
pub fn extract_maneuver_features(scene: &Scene, vehicle: i64, t: i64) -> Result<ManeuverSequence> {
    let road = scene.road();
    let last = require_state(scene, vehicle, t)?;
    let first = t - (OBSERVATION_FRAMES as i64 - 1);
    let mut seq = ManeuverSequence::zeros();
    for (k, row) in seq.0.iter_mut().enumerate() {
        let f = first + k as i64;
        let s = scene.state(vehicle, f).ok_or_else(|| {
            Error::validation(format!(
                "vehicle {} lacks observation history at frame {} (needs {}..={})",
                vehicle, f, first, t
            ))
        })?;
        *row = [
            s.x_lat - last.x_lat,
            s.x_long - last.x_long,
            (s.x_lat - road.lane_center(s.lane_id)) / road.lane_width(),
            s.v_long,
            s.v_lat,
            s.theta,
        ];
    }
    Ok(seq)
}

/// Observation of a virtual vehicle: lane-centered, constant speed.
pub fn virtual_maneuver_features(v_long: f64) -> ManeuverSequence {
    let mut seq = ManeuverSequence::zeros();
    let n = OBSERVATION_FRAMES as f64;
    for (k, row) in seq.0.iter_mut().enumerate() {
        let dt = (k as f64 - (n - 1.0)) * FRAME_DT;
        *row = [0.0, dt * v_long, 0.0, v_long, 0.0, 0.0];
    }
    seq
}

/// Picks the eight neighbors of `target` at frame `t`. Ties in distance
/// go to the smaller vehicle id.
pub fn select_neighbors(scene: &Scene, target: i64, t: i64) -> Result<NeighborSlots> {
    let me = *require_state(scene, target, t)?;
    let others: Vec<&VehicleState> = scene
        .vehicles_at(t)
        .iter()
        .filter(|s| s.vehicle_id != target)
        .collect();
    let in_lane = |lane: i32| -> Vec<&VehicleState> {
        others.iter().copied().filter(|s| s.lane_id == lane).collect()
    };
    // Minimizes (key, id); returns the vehicle id.
    let best = |cands: &mut dyn Iterator<Item = &VehicleState>, key: &dyn Fn(&VehicleState) -> f64| {
        cands
            .map(|s| (key(s), s.vehicle_id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    };
    let slot = |id: Option<i64>| id.map_or(Slot::Virtual, Slot::Vehicle);

    let same = in_lane(me.lane_id);
    let front = best(
        &mut same.iter().copied().filter(|s| s.x_long >= me.x_long),
        &|s| s.x_long - me.x_long,
    );
    let rear = best(
        &mut same.iter().copied().filter(|s| s.x_long < me.x_long),
        &|s| me.x_long - s.x_long,
    );

    let side = |lane: i32| -> [Slot; 3] {
        if !scene.road().has_lane(lane) {
            return [Slot::Virtual; 3];
        }
        let cands = in_lane(lane);
        let closest = best(&mut cands.iter().copied(), &|s| (s.x_long - me.x_long).abs());
        let Some(cid) = closest else {
            return [Slot::Virtual; 3];
        };
        let anchor = cands
            .iter()
            .find(|s| s.vehicle_id == cid)
            .expect("closest is a candidate")
            .x_long;
        let ahead = best(
            &mut cands.iter().copied().filter(|s| s.x_long > anchor),
            &|s| s.x_long - anchor,
        );
        let behind = best(
            &mut cands.iter().copied().filter(|s| s.x_long < anchor),
            &|s| anchor - s.x_long,
        );
        [Slot::Vehicle(cid), slot(ahead), slot(behind)]
    };
    let left = side(me.lane_id - 1);
    let right = side(me.lane_id + 1);
    Ok(NeighborSlots([
        slot(front),
        slot(rear),
        left[0],
        left[1],
        left[2],
        right[0],
        right[1],
        right[2],
    ]))
}

/// Connection feature between `target` and the vehicle in one slot.
pub fn connection_feature(
    scene: &Scene,
    target: i64,
    kind: SlotKind,
    slot: Slot,
    t: i64,
) -> Result<ConnectionFeature> {
    let me = require_state(scene, target, t)?;
    match slot {
        Slot::Vehicle(id) => {
            let n = require_state(scene, id, t)?;
            Ok([
                n.x_long - me.x_long,
                n.x_lat - me.x_lat,
                me.v_long,
                me.v_lat,
                n.v_long,
                n.v_lat,
            ])
        }
        Slot::Virtual => Ok([
            kind.virtual_direction() * VIRTUAL_DISTANCE,
            kind.lane_offset() as f64 * scene.road().lane_width(),
            me.v_long,
            me.v_lat,
            me.v_long,
            0.0,
        ]),
    }
}

fn crossing_direction(from: i32, to: i32) -> Behavior {
    if to < from {
        Behavior::ChangeLeft
    } else {
        Behavior::ChangeRight
    }
}

/// Label of the decision at `t`: the first divider crossing within the
/// 40-frame window (inclusive) decides the class, otherwise lane keeping.
pub fn label_sample(scene: &Scene, vehicle: i64, t: i64) -> Result<(Behavior, Ttlc)> {
    let mut prev = require_state(scene, vehicle, t)?.lane_id;
    for k in 1..=PREDICTION_FRAMES as i64 {
        let s = scene.state(vehicle, t + k).ok_or_else(|| {
            Error::validation(format!(
                "vehicle {} lacks prediction window at frame {}",
                vehicle,
                t + k
            ))
        })?;
        if s.lane_id != prev {
            return Ok((crossing_direction(prev, s.lane_id), Ttlc::from_frames(k)));
        }
        prev = s.lane_id;
    }
    Ok((Behavior::LaneKeep, Ttlc::Never))
}

/// Frames at which a vehicle's lane differs from the previous frame.
pub fn crossing_frames(track: &[VehicleState]) -> Vec<i64> {
    track
        .windows(2)
        .filter(|w| w[0].lane_id != w[1].lane_id)
        .map(|w| w[1].frame)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOptions {
    /// LK tracks drawn per LC event of the scene.
    pub lk_events_per_lc: f64,
    /// Seeds the choice of LK tracks.
    pub seed: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            lk_events_per_lc: 1.0,
            seed: 0,
        }
    }
}

/// Everything needed to evaluate the network for one target at one frame.
pub fn assemble_sample(
    scene: &Scene,
    scene_id: u32,
    event_id: u64,
    vehicle: i64,
    t: i64,
    ttlc: Ttlc,
) -> Result<LabeledSample> {
    let (label, _) = label_sample(scene, vehicle, t)?;
    let target = extract_maneuver_features(scene, vehicle, t)?;
    let slots = select_neighbors(scene, vehicle, t)?;
    let me = require_state(scene, vehicle, t)?;
    let mut neighbors = [NeighborEntry {
        vehicle_id: None,
        features: ManeuverSequence::zeros(),
        connection: [0.0; 6],
    }; NEIGHBOR_SLOTS];
    for (entry, (kind, slot)) in neighbors.iter_mut().zip(slots.iter()) {
        entry.vehicle_id = slot.vehicle_id();
        entry.connection = connection_feature(scene, vehicle, kind, slot, t)?;
        entry.features = match slot {
            Slot::Vehicle(id) => match extract_maneuver_features(scene, id, t) {
                Ok(f) => f,
                // A neighbor that entered the scene recently has no full
                // history; it is observed as a constant-speed vehicle.
                Err(_) => virtual_maneuver_features(require_state(scene, id, t)?.v_long),
            },
            Slot::Virtual => virtual_maneuver_features(me.v_long),
        };
    }
    Ok(LabeledSample {
        scene_id,
        event_id,
        vehicle_id: vehicle,
        frame: t,
        label,
        ttlc,
        target,
        neighbors,
    })
}

/// Decision frames of one vehicle that have a full observation and
/// prediction window.
fn decision_range(track: &[VehicleState]) -> Option<(i64, i64)> {
    let first = track.first()?.frame + OBSERVATION_FRAMES as i64 - 1;
    let last = track.last()?.frame - PREDICTION_FRAMES as i64;
    (first <= last).then_some((first, last))
}

/// Sliding-window samples of a scene: every LC event contributes its
/// decision frames from 8 s to 0.1 s before the crossing; LK tracks are
/// 80-frame runs free of any crossing in the following 8 s, drawn in
/// proportion to the number of LC events.
pub fn build_samples(scene: &Scene, scene_id: u32, options: &SampleOptions) -> Result<Vec<LabeledSample>> {
    let horizon = EVENT_HISTORY_FRAMES as i64;
    let mut next_event = 0u64;
    let mut event_id = || {
        next_event += 1;
        ((scene_id as u64) << 32) | (next_event - 1)
    };

    let mut samples = Vec::new();
    let mut lk_chunks: Vec<(i64, i64)> = Vec::new();
    let mut lc_events = 0usize;
    for (vehicle, track) in scene.tracks() {
        let Some((lo, hi)) = decision_range(track) else {
            continue;
        };
        let crossings = crossing_frames(track);
        let mut events: BTreeMap<i64, u64> = BTreeMap::new();
        let mut run_start: Option<i64> = None;
        let flush = |start: Option<i64>, end: i64, chunks: &mut Vec<(i64, i64)>| {
            if let Some(s) = start {
                let mut c = s;
                while c + horizon - 1 <= end {
                    chunks.push((vehicle, c));
                    c += horizon;
                }
            }
        };
        for t in lo..=hi {
            let next = crossings.iter().copied().find(|&c| c > t);
            match next {
                Some(c) if c - t <= horizon => {
                    flush(run_start.take(), t - 1, &mut lk_chunks);
                    let id = *events.entry(c).or_insert_with(|| {
                        lc_events += 1;
                        event_id()
                    });
                    samples.push(assemble_sample(
                        scene,
                        scene_id,
                        id,
                        vehicle,
                        t,
                        Ttlc::from_frames(c - t),
                    )?);
                }
                _ => {
                    if run_start.is_none() {
                        run_start = Some(t);
                    }
                }
            }
        }
        flush(run_start.take(), hi, &mut lk_chunks);
    }

    let wanted = ((lc_events as f64) * options.lk_events_per_lc).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ ((scene_id as u64) << 17));
    lk_chunks.shuffle(&mut rng);
    lk_chunks.truncate(wanted);
    lk_chunks.sort();
    for (vehicle, start) in lk_chunks {
        let id = event_id();
        for t in start..start + horizon {
            samples.push(assemble_sample(scene, scene_id, id, vehicle, t, Ttlc::Never)?);
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests;
