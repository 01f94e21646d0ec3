//! Rule-based multi-lane highway traffic: IDM car following, incentive-based
//! lane changes with a politeness term, quintic lateral profiles.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    Behavior, LabeledSample, RoadGeometry, Scene, Ttlc, VehicleState, FRAME_DT, OBSERVATION_FRAMES,
    PREDICTION_FRAMES,
};
use crate::error::{Error, Result};
use crate::features::{build_samples, SampleOptions};

/// Maximum lateral wander around the lane center, m.
const WANDER_LIMIT: f64 = 0.6;
/// Mean reversion rate of the lateral wander, 1/s.
const WANDER_REVERSION: f64 = 0.5;
const SPAWN_ATTEMPTS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub time_headway: f64,
    pub jam_distance: f64,
    /// Required gain in achievable acceleration before changing lanes, m/s².
    pub lc_threshold: f64,
    pub politeness: f64,
    /// Duration of the lateral movement, s.
    pub lc_duration: f64,
    pub accel_noise: f64,
    pub lateral_noise: f64,
}

impl DriverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("max_accel", self.max_accel),
            ("comfortable_decel", self.comfortable_decel),
            ("time_headway", self.time_headway),
            ("jam_distance", self.jam_distance),
            ("lc_threshold", self.lc_threshold),
            ("politeness", self.politeness),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{} must be positive, got {}", name, v)));
            }
        }
        for (name, v) in [("accel_noise", self.accel_noise), ("lateral_noise", self.lateral_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{} must be non-negative, got {}", name, v)));
            }
        }
        if !(3.0..=5.0).contains(&self.lc_duration) {
            return Err(Error::Config(format!(
                "lc_duration must lie in [3, 5] s, got {}",
                self.lc_duration
            )));
        }
        Ok(())
    }

    /// IDM acceleration given the gap to and speed of the leader, if any.
    pub fn idm_accel(&self, v: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (v / self.desired_speed).powi(4);
        match leader {
            None => self.max_accel * free,
            Some((gap, v_leader)) => {
                let dyn_gap = v * self.time_headway
                    + v * (v - v_leader) / (2.0 * (self.max_accel * self.comfortable_decel).sqrt());
                let s_star = self.jam_distance + dyn_gap.max(0.0);
                self.max_accel * (free - (s_star / gap.max(0.1)).powi(2))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub lane_count: usize,
    pub lane_width: f64,
    /// Length of the section vehicles are spawned on, m.
    pub lane_length: f64,
    pub vehicle_count: usize,
    pub duration_frames: usize,
    pub seed: u64,
    /// Share of slow vehicles (trucks); the rest are fast cars.
    pub slow_fraction: f64,
    pub slow_speed_min: f64,
    pub slow_speed_max: f64,
    pub fast_speed_min: f64,
    pub fast_speed_max: f64,
    pub vehicle_length: f64,
    /// Bumper-to-bumper distance that is never undercut.
    pub min_gap: f64,
    /// Hard braking limit, m/s².
    pub max_decel: f64,
    /// A lane change is unsafe if it forces the new follower to brake harder.
    pub safe_decel: f64,
    /// Seconds after a completed lane change before the next may start.
    pub lc_cooldown: f64,
    /// Rate of lane changes without incentive, per vehicle and second.
    pub exploration_rate: f64,
    pub lc_duration_min: f64,
    pub lc_duration_max: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub time_headway: f64,
    pub jam_distance: f64,
    pub lc_threshold: f64,
    pub politeness: f64,
    pub accel_noise: f64,
    pub lateral_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            lane_count: 3,
            lane_width: 3.7,
            lane_length: 600.0,
            vehicle_count: 36,
            duration_frames: 900,
            seed: 0,
            slow_fraction: 0.3,
            slow_speed_min: 14.0,
            slow_speed_max: 20.0,
            fast_speed_min: 26.0,
            fast_speed_max: 34.0,
            vehicle_length: 5.0,
            min_gap: 0.5,
            max_decel: 8.0,
            safe_decel: 3.0,
            lc_cooldown: 6.0,
            exploration_rate: 0.002,
            lc_duration_min: 3.0,
            lc_duration_max: 5.0,
            max_accel: 1.5,
            comfortable_decel: 2.0,
            time_headway: 1.2,
            jam_distance: 2.0,
            lc_threshold: 0.5,
            politeness: 0.3,
            accel_noise: 0.2,
            lateral_noise: 0.2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<RoadGeometry> {
        let road = RoadGeometry::new(self.lane_count, self.lane_width)
            .map_err(|e| Error::Config(e.to_string()))?;
        let checks = [
            ("lane_length", self.lane_length),
            ("slow_speed_min", self.slow_speed_min),
            ("fast_speed_min", self.fast_speed_min),
            ("vehicle_length", self.vehicle_length),
            ("min_gap", self.min_gap),
            ("max_decel", self.max_decel),
            ("safe_decel", self.safe_decel),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{} must be positive, got {}", name, v)));
            }
        }
        if self.slow_speed_max < self.slow_speed_min || self.fast_speed_max < self.fast_speed_min {
            return Err(Error::Config("speed range max below min".into()));
        }
        if !(0.0..=1.0).contains(&self.slow_fraction) {
            return Err(Error::Config(format!("slow_fraction {} outside [0, 1]", self.slow_fraction)));
        }
        if !(self.exploration_rate >= 0.0 && self.lc_cooldown >= 0.0) {
            return Err(Error::Config("exploration_rate and lc_cooldown must be non-negative".into()));
        }
        if !(3.0 <= self.lc_duration_min && self.lc_duration_min <= self.lc_duration_max && self.lc_duration_max <= 5.0) {
            return Err(Error::Config(format!(
                "lane-change duration range [{}, {}] must lie in [3, 5] s",
                self.lc_duration_min, self.lc_duration_max
            )));
        }
        if self.max_decel < self.comfortable_decel {
            return Err(Error::Config("max_decel below comfortable_decel".into()));
        }
        self.driver(self.fast_speed_min, self.lc_duration_min).validate()?;
        Ok(road)
    }

    /// Driver parameters with the configured shared values.
    pub fn driver(&self, desired_speed: f64, lc_duration: f64) -> DriverParams {
        DriverParams {
            desired_speed,
            max_accel: self.max_accel,
            comfortable_decel: self.comfortable_decel,
            time_headway: self.time_headway,
            jam_distance: self.jam_distance,
            lc_threshold: self.lc_threshold,
            politeness: self.politeness,
            lc_duration,
            accel_noise: self.accel_noise,
            lateral_noise: self.lateral_noise,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialVehicle {
    pub lane: i32,
    pub x_long: f64,
    pub v_long: f64,
    pub params: DriverParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneChangeStart {
    pub vehicle_id: i64,
    pub frame: i64,
    pub from: i32,
    pub to: i32,
    /// Whether the change was taken without incentive.
    pub exploratory: bool,
}

#[derive(Clone, Copy, Debug)]
struct LaneChange {
    from: i32,
    to: i32,
    start: i64,
    frames: i64,
}

#[derive(Clone, Debug)]
struct Vehicle {
    params: DriverParams,
    x: f64,
    v: f64,
    lane: i32,
    change: Option<LaneChange>,
    last_change_end: f64,
    wander: f64,
    x_lat: f64,
    v_lat: f64,
}

impl Vehicle {
    fn occupies(&self, lane: i32) -> bool {
        self.lane == lane || self.change.is_some_and(|c| c.from == lane)
    }
}

pub struct Simulator {
    config: SimConfig,
    road: RoadGeometry,
    rng: ChaCha8Rng,
    vehicles: Vec<Vehicle>,
    frame: i64,
    states: Vec<VehicleState>,
    events: Vec<LaneChangeStart>,
}

fn quintic(tau: f64) -> (f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    (s, ds)
}

impl Simulator {
    /// Spawns `vehicle_count` vehicles on the spawn section.
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placed: Vec<InitialVehicle> = Vec::with_capacity(config.vehicle_count);
        for k in 0..config.vehicle_count {
            let slow = rng.gen_bool(config.slow_fraction);
            let desired = if slow {
                rng.gen_range(config.slow_speed_min..=config.slow_speed_max)
            } else {
                rng.gen_range(config.fast_speed_min..=config.fast_speed_max)
            };
            let lc_duration = rng.gen_range(config.lc_duration_min..=config.lc_duration_max);
            let mut params = config.driver(desired, lc_duration);
            params.lc_threshold *= rng.gen_range(0.5..1.5);
            params.time_headway *= rng.gen_range(0.8..1.2);
            let v = desired * rng.gen_range(0.85..1.0);
            let mut spot = None;
            for _ in 0..SPAWN_ATTEMPTS {
                let lane = rng.gen_range(0..config.lane_count as i32);
                let x = rng.gen_range(0.0..config.lane_length);
                let clear = placed.iter().filter(|o| o.lane == lane).all(|o| {
                    let need = config.vehicle_length
                        + params.jam_distance
                        + 0.5 * params.time_headway * v.max(o.v_long);
                    (o.x_long - x).abs() >= need
                });
                if clear {
                    spot = Some((lane, x));
                    break;
                }
            }
            let (lane, x_long) = spot.ok_or_else(|| {
                Error::Config(format!(
                    "cannot place vehicle {} of {} on a {} m section without overlap",
                    k + 1,
                    config.vehicle_count,
                    config.lane_length
                ))
            })?;
            placed.push(InitialVehicle { lane, x_long, v_long: v, params });
        }
        Self::with_rng(config, placed, rng)
    }

    /// Starts from explicitly placed vehicles; ids follow the slice order.
    pub fn from_initial(config: &SimConfig, vehicles: &[InitialVehicle], seed: u64) -> Result<Self> {
        config.validate()?;
        Self::with_rng(config, vehicles.to_vec(), ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_rng(config: &SimConfig, initial: Vec<InitialVehicle>, rng: ChaCha8Rng) -> Result<Self> {
        let road = config.validate()?;
        let mut vehicles = Vec::with_capacity(initial.len());
        for (i, v) in initial.iter().enumerate() {
            v.params.validate()?;
            if !road.has_lane(v.lane) || !v.x_long.is_finite() || !(v.v_long >= 0.0) {
                return Err(Error::Config(format!("invalid initial state for vehicle {}", i)));
            }
            vehicles.push(Vehicle {
                params: v.params,
                x: v.x_long,
                v: v.v_long,
                lane: v.lane,
                change: None,
                last_change_end: f64::NEG_INFINITY,
                wander: 0.0,
                x_lat: road.lane_center(v.lane),
                v_lat: 0.0,
            });
        }
        for (i, a) in vehicles.iter().enumerate() {
            for b in &vehicles[i + 1..] {
                if a.lane == b.lane && (a.x - b.x).abs() < config.vehicle_length + config.min_gap {
                    return Err(Error::Config("initial vehicles overlap".into()));
                }
            }
        }
        let mut sim = Simulator {
            config: config.clone(),
            road,
            rng,
            vehicles,
            frame: 0,
            states: Vec::new(),
            events: Vec::new(),
        };
        sim.record();
        Ok(sim)
    }

    pub fn frame(&self) -> i64 {
        self.frame
    }

    pub fn events(&self) -> &[LaneChangeStart] {
        &self.events
    }

    fn record(&mut self) {
        for (id, v) in self.vehicles.iter().enumerate() {
            let lane_id = self
                .road
                .lane_of(v.x_lat)
                .expect("lateral position stays on the road");
            self.states.push(VehicleState {
                vehicle_id: id as i64,
                frame: self.frame,
                lane_id,
                x_long: v.x,
                x_lat: v.x_lat,
                v_long: v.v,
                v_lat: v.v_lat,
                theta: v.v_lat.atan2(v.v.max(1e-3)),
            });
        }
    }

    /// Gap to and speed of the nearest vehicle ahead of `i` in `lane`.
    fn leader(&self, i: usize, x: f64, lane: i32) -> Option<(f64, f64)> {
        let len = self.config.vehicle_length;
        self.vehicles
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && o.occupies(lane) && (o.x > x || (o.x == x && j > i)))
            .min_by(|a, b| a.1.x.total_cmp(&b.1.x))
            .map(|(_, o)| (o.x - x - len, o.v))
    }

    /// Index and gap of the nearest vehicle behind position `x` in `lane`.
    fn follower(&self, i: usize, x: f64, lane: i32) -> Option<(usize, f64)> {
        let len = self.config.vehicle_length;
        self.vehicles
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && o.occupies(lane) && (o.x < x || (o.x == x && j < i)))
            .max_by(|a, b| a.1.x.total_cmp(&b.1.x))
            .map(|(j, o)| (j, x - o.x - len))
    }

    fn current_accel(&self, i: usize) -> f64 {
        let v = &self.vehicles[i];
        let mut a = v.params.idm_accel(v.v, self.leader(i, v.x, v.lane));
        if let Some(c) = v.change {
            a = a.min(v.params.idm_accel(v.v, self.leader(i, v.x, c.from)));
        }
        a
    }

    /// Incentive for moving `i` into `lane`, or `None` if unsafe.
    fn incentive(&self, i: usize, lane: i32) -> Option<f64> {
        let me = &self.vehicles[i];
        let p = &me.params;
        let new_leader = self.leader(i, me.x, lane);
        let min_front = self.config.min_gap + p.jam_distance;
        if new_leader.is_some_and(|(gap, _)| gap < min_front) {
            return None;
        }
        let mut follower_gain = 0.0;
        if let Some((f, gap)) = self.follower(i, me.x, lane) {
            if gap < self.config.min_gap + p.jam_distance {
                return None;
            }
            let fv = &self.vehicles[f];
            let after = fv.params.idm_accel(fv.v, Some((gap, me.v)));
            if after < -self.config.safe_decel {
                return None;
            }
            let before = fv.params.idm_accel(fv.v, self.leader(f, fv.x, lane));
            follower_gain = after - before;
        }
        let gain = p.idm_accel(me.v, new_leader) - self.current_accel(i);
        Some(gain + p.politeness * follower_gain)
    }

    fn decide_lane_changes(&mut self) {
        let t = self.frame as f64 * FRAME_DT;
        let explore_p = (self.config.exploration_rate * FRAME_DT).min(1.0);
        for i in 0..self.vehicles.len() {
            let v = &self.vehicles[i];
            if v.change.is_some() || t - v.last_change_end < self.config.lc_cooldown {
                continue;
            }
            let lane = v.lane;
            let threshold = v.params.lc_threshold;
            let candidates: Vec<(i32, f64)> = [lane - 1, lane + 1]
                .into_iter()
                .filter(|&l| self.road.has_lane(l))
                .filter_map(|l| self.incentive(i, l).map(|g| (l, g)))
                .collect();
            let best = candidates
                .iter()
                .copied()
                .filter(|&(_, g)| g > threshold)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let explore = self.rng.gen_bool(explore_p);
            let choice = match best {
                Some((l, _)) => Some((l, false)),
                None if explore && !candidates.is_empty() => {
                    let k = self.rng.gen_range(0..candidates.len());
                    Some((candidates[k].0, true))
                }
                None => None,
            };
            if let Some((to, exploratory)) = choice {
                let v = &mut self.vehicles[i];
                let frames = (v.params.lc_duration / FRAME_DT).round() as i64;
                v.change = Some(LaneChange {
                    from: lane,
                    to,
                    start: self.frame,
                    frames,
                });
                v.lane = to;
                self.events.push(LaneChangeStart {
                    vehicle_id: i as i64,
                    frame: self.frame,
                    from: lane,
                    to,
                    exploratory,
                });
            }
        }
    }

    /// Advances one frame.
    pub fn step(&mut self) {
        let accels: Vec<f64> = (0..self.vehicles.len()).map(|i| self.current_accel(i)).collect();
        self.decide_lane_changes();
        self.frame += 1;
        let t = self.frame as f64 * FRAME_DT;
        let max_decel = self.config.max_decel;
        for (v, a) in self.vehicles.iter_mut().zip(accels) {
            let noise: f64 = self.rng.sample(StandardNormal);
            let a = (a + v.params.accel_noise * noise).clamp(-max_decel, v.params.max_accel);
            let v_new = (v.v + a * FRAME_DT).max(0.0);
            v.x += 0.5 * (v.v + v_new) * FRAME_DT;
            v.v = v_new;
        }
        self.enforce_min_gap();

        for v in self.vehicles.iter_mut() {
            let prev = v.x_lat;
            match v.change {
                Some(c) => {
                    let tau = (self.frame - c.start) as f64 / c.frames as f64;
                    let from = self.road.lane_center(c.from);
                    let to = self.road.lane_center(c.to);
                    let (s, ds) = quintic(tau);
                    v.x_lat = from + (to - from) * s + v.wander;
                    v.v_lat = (to - from) * ds / v.params.lc_duration;
                    if tau >= 1.0 {
                        v.change = None;
                        v.last_change_end = t;
                    }
                }
                None => {
                    let n: f64 = self.rng.sample(StandardNormal);
                    let sigma = v.params.lateral_noise * (2.0 * WANDER_REVERSION * FRAME_DT).sqrt();
                    v.wander = (v.wander * (1.0 - WANDER_REVERSION * FRAME_DT) + sigma * n)
                        .clamp(-WANDER_LIMIT, WANDER_LIMIT);
                    v.x_lat = self.road.lane_center(v.lane) + v.wander;
                    v.v_lat = (v.x_lat - prev) / FRAME_DT;
                }
            }
        }
        self.record();
    }

    fn enforce_min_gap(&mut self) {
        let min_gap = self.config.min_gap;
        let mut order: Vec<usize> = (0..self.vehicles.len()).collect();
        order.sort_by(|&a, &b| self.vehicles[b].x.total_cmp(&self.vehicles[a].x).then(b.cmp(&a)));
        for &i in &order {
            let v = &self.vehicles[i];
            let mut limit = f64::INFINITY;
            let lanes = [Some(v.lane), v.change.map(|c| c.from)];
            for lane in lanes.into_iter().flatten() {
                if let Some((gap, _)) = self.leader(i, v.x, lane) {
                    if gap < min_gap {
                        limit = limit.min(v.x + gap - min_gap);
                    }
                }
            }
            if limit.is_finite() {
                self.vehicles[i].x = limit;
            }
        }
    }

    /// Runs until `duration_frames` frames exist and returns the scene.
    pub fn run(mut self) -> Result<Scene> {
        while (self.frame + 1) < self.config.duration_frames as i64 {
            self.step();
        }
        self.into_scene()
    }

    pub fn into_scene(self) -> Result<Scene> {
        Scene::from_states(self.road, self.states)
    }
}

pub fn simulate_scene(config: &SimConfig, seed: u64) -> Result<Scene> {
    Simulator::new(config, seed)?.run()
}

/// Seed of scene `index` in a dataset generated from `seed`.
pub fn scene_seed(seed: u64, index: u32) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetReport {
    pub scenes: usize,
    pub skipped_scenes: usize,
    pub lc_events: usize,
    /// Sample counts indexed by behavior class.
    pub class_counts: [usize; 3],
}

#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub scenes: Vec<(u32, Scene)>,
    pub samples: Vec<LabeledSample>,
    pub report: DatasetReport,
}

/// Simulates `n_scenes` scenes and labels them with sliding windows.
pub fn generate_dataset(config: &SimConfig, n_scenes: usize, seed: u64) -> Result<GeneratedDataset> {
    config.validate()?;
    let mut out = GeneratedDataset {
        scenes: Vec::new(),
        samples: Vec::new(),
        report: DatasetReport::default(),
    };
    let min_frames = OBSERVATION_FRAMES + PREDICTION_FRAMES;
    for k in 0..n_scenes as u32 {
        if config.duration_frames < min_frames {
            out.report.skipped_scenes += 1;
            continue;
        }
        let scene = simulate_scene(config, scene_seed(seed, k))?;
        let opts = SampleOptions {
            seed: scene_seed(seed, k),
            ..SampleOptions::default()
        };
        let samples = build_samples(&scene, k, &opts)?;
        out.report.lc_events += samples
            .iter()
            .filter(|s| s.ttlc.is_finite())
            .map(|s| s.event_id)
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        out.samples.extend(samples);
        out.scenes.push((k, scene));
        out.report.scenes += 1;
    }
    for s in &out.samples {
        out.report.class_counts[s.label.index()] += 1;
    }
    if out.report.skipped_scenes > 0 {
        log::warn!(
            "{} scenes skipped: {} frames are fewer than the {} needed for one window",
            out.report.skipped_scenes,
            config.duration_frames,
            min_frames
        );
    }
    info!(
        "generated {} samples from {} scenes ({} LC events): {} {}, {} {}, {} {}",
        out.samples.len(),
        out.report.scenes,
        out.report.lc_events,
        Behavior::LaneKeep.short_name(),
        out.report.class_counts[0],
        Behavior::ChangeLeft.short_name(),
        out.report.class_counts[1],
        Behavior::ChangeRight.short_name(),
        out.report.class_counts[2],
    );
    Ok(out)
}

/// Mann-Whitney AUC: probability that a positive score exceeds a negative
/// one, ties counting half. `None` if either side is empty.
pub fn mann_whitney_auc(positive: &[f64], negative: &[f64]) -> Option<f64> {
    if positive.is_empty() || negative.is_empty() {
        return None;
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&v| (v, true))
        .chain(negative.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }
    let (p, n) = (positive.len() as f64, negative.len() as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Closing speed on the front neighbor, `v_target - v_front`.
pub fn front_closing_speed(sample: &LabeledSample) -> f64 {
    let c = sample.neighbors[0].connection;
    c[2] - c[4]
}

/// TTLC at which [`interaction_auc`] samples lane changes.
pub const INTERACTION_PROBE_FRAMES: i64 = 40;

/// Sanity check that the data carries interaction signal: AUC of the front
/// closing speed between LC events at TTLC 4 s and samples of LK tracks.
pub fn interaction_auc(samples: &[LabeledSample]) -> Option<f64> {
    let probe = Ttlc::from_frames(INTERACTION_PROBE_FRAMES);
    let early: Vec<f64> = samples
        .iter()
        .filter(|s| s.ttlc == probe)
        .map(front_closing_speed)
        .collect();
    let keep: Vec<f64> = samples
        .iter()
        .filter(|s| !s.ttlc.is_finite())
        .map(front_closing_speed)
        .collect();
    mann_whitney_auc(&early, &keep)
}
