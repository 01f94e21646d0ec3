//! Ingestion of NGSIM-style delimited trajectory files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;

use super::{RoadGeometry, Scene, VehicleState, FRAME_RATE_HZ};
use crate::error::{Error, Result};

/// Header names of the columns the ingester reads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgsimColumns {
    pub vehicle_id: String,
    pub frame: String,
    pub x_lat: String,
    pub x_long: String,
    pub v_long: String,
    pub lane_id: String,
}

impl Default for NgsimColumns {
    fn default() -> Self {
        NgsimColumns {
            vehicle_id: "Vehicle_ID".into(),
            frame: "Frame_ID".into(),
            x_lat: "Local_X".into(),
            x_long: "Local_Y".into(),
            v_long: "v_Vel".into(),
            lane_id: "Lane_ID".into(),
        }
    }
}

impl NgsimColumns {
    /// Overrides defaults from `key=value` pairs separated by commas or
    /// newlines, e.g. `x_lat=Local_Y,x_long=Local_X`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut cols = Self::default();
        for item in spec.split([',', '\n']).map(str::trim).filter(|s| !s.is_empty()) {
            if item.starts_with('#') {
                continue;
            }
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("column map entry `{}` is not key=value", item)))?;
            let value = value.trim().to_string();
            match key.trim() {
                "vehicle_id" => cols.vehicle_id = value,
                "frame" => cols.frame = value,
                "x_lat" => cols.x_lat = value,
                "x_long" => cols.x_long = value,
                "v_long" => cols.v_long = value,
                "lane_id" => cols.lane_id = value,
                other => return Err(Error::Config(format!("unknown column key `{}`", other))),
            }
        }
        Ok(cols)
    }
}

#[derive(Clone, Debug)]
pub struct NgsimOptions {
    pub delimiter: u8,
    pub columns: NgsimColumns,
    pub road: RoadGeometry,
    /// Multiplier converting file units to meters (0.3048 for feet).
    pub unit_scale: f64,
    /// Lane id used in the file for the leftmost lane.
    pub lane_base: i32,
    /// Centered moving-average window for derived lateral velocity.
    pub smoothing_window: usize,
}

impl NgsimOptions {
    pub fn new(road: RoadGeometry) -> Self {
        NgsimOptions {
            delimiter: b',',
            columns: NgsimColumns::default(),
            road,
            unit_scale: 1.0,
            lane_base: 1,
            smoothing_window: 5,
        }
    }
}

pub fn ingest_ngsim(path: impl AsRef<Path>, options: &NgsimOptions) -> Result<Scene> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_ngsim(file, options)
}

struct Row {
    vehicle_id: i64,
    frame: i64,
    x_lat: f64,
    x_long: f64,
    v_long: f64,
}

pub fn parse_ngsim<R: Read>(reader: R, options: &NgsimOptions) -> Result<Scene> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::validation(format!("reading header: {}", e)))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Scene::empty(options.road));
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let c = &options.columns;
    let idx_vehicle = col(&c.vehicle_id)?;
    let idx_frame = col(&c.frame)?;
    let idx_lat = col(&c.x_lat)?;
    let idx_long = col(&c.x_long)?;
    let idx_vel = col(&c.v_long)?;
    let idx_lane = col(&c.lane_id)?;

    let road = options.road;
    let mut rows: BTreeMap<i64, Vec<Row>> = BTreeMap::new();
    let mut lane_disagreements = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::validation(format!("row {}: {}", line + 1, e)))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let int = |i: usize| -> Result<i64> {
            let s = field(i);
            s.parse::<i64>()
                .or_else(|_| s.parse::<f64>().map(|f| f as i64))
                .map_err(|_| Error::validation(format!("row {}: `{}` is not an integer", line + 1, s)))
        };
        let real = |i: usize| -> Result<f64> {
            let s = field(i);
            s.parse::<f64>()
                .map_err(|_| Error::validation(format!("row {}: `{}` is not a number", line + 1, s)))
        };
        let lane = int(idx_lane)? as i32 - options.lane_base;
        if !road.has_lane(lane) {
            return Err(Error::validation(format!(
                "row {}: unknown lane id {} for a {}-lane road",
                line + 1,
                lane + options.lane_base,
                road.lane_count()
            )));
        }
        let row = Row {
            vehicle_id: int(idx_vehicle)?,
            frame: int(idx_frame)?,
            x_lat: real(idx_lat)? * options.unit_scale,
            x_long: real(idx_long)? * options.unit_scale,
            v_long: real(idx_vel)? * options.unit_scale,
        };
        if road.lane_of(row.x_lat) != Some(lane) {
            lane_disagreements += 1;
        }
        rows.entry(row.vehicle_id).or_default().push(row);
    }
    if lane_disagreements > 0 {
        warn!(
            "{} rows have a lane id that disagrees with their lateral position; lane ids are taken from geometry",
            lane_disagreements
        );
    }

    let mut next_id = rows.keys().next_back().map_or(0, |m| m + 1);
    let mut states = Vec::new();
    for (vehicle_id, mut track) in rows {
        track.sort_by_key(|r| r.frame);
        if let Some(w) = track.windows(2).find(|w| w[0].frame == w[1].frame) {
            return Err(Error::validation(format!(
                "vehicle {} appears twice in frame {}",
                vehicle_id, w[0].frame
            )));
        }
        let segments = split_contiguous(&track);
        if segments.len() > 1 {
            warn!(
                "vehicle {} has {} frame gaps; split into separate trajectories",
                vehicle_id,
                segments.len() - 1
            );
        }
        for (k, seg) in segments.into_iter().enumerate() {
            let id = if k == 0 {
                vehicle_id
            } else {
                next_id += 1;
                next_id - 1
            };
            states.extend(derive_states(id, seg, &road, options.smoothing_window)?);
        }
    }
    Scene::from_states(road, states)
}

fn split_contiguous(track: &[Row]) -> Vec<&[Row]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..track.len() {
        if track[i].frame != track[i - 1].frame + 1 {
            out.push(&track[start..i]);
            start = i;
        }
    }
    if !track.is_empty() {
        out.push(&track[start..]);
    }
    out
}

/// Backward differences (the first frame reuses the second frame's value).
pub(crate) fn difference(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut d: Vec<f64> = Vec::with_capacity(n);
    d.push((xs[1] - xs[0]) * FRAME_RATE_HZ);
    for i in 1..n {
        d.push((xs[i] - xs[i - 1]) * FRAME_RATE_HZ);
    }
    d
}

/// Centered moving average, truncated at the ends.
pub(crate) fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn derive_states(
    vehicle_id: i64,
    seg: &[Row],
    road: &RoadGeometry,
    window: usize,
) -> Result<Vec<VehicleState>> {
    let lat: Vec<f64> = seg.iter().map(|r| r.x_lat).collect();
    let v_lat = moving_average(&difference(&lat), window);
    seg.iter()
        .zip(v_lat)
        .map(|(r, v_lat)| {
            let lane_id = road.lane_of(r.x_lat).ok_or_else(|| {
                Error::validation(format!(
                    "vehicle {} at frame {}: x_lat {} is off the road",
                    vehicle_id, r.frame, r.x_lat
                ))
            })?;
            Ok(VehicleState {
                vehicle_id,
                frame: r.frame,
                lane_id,
                x_long: r.x_long,
                x_lat: r.x_lat,
                v_long: r.v_long,
                v_lat,
                theta: v_lat.atan2(r.v_long.max(1e-3)),
            })
        })
        .collect()
}
