//! Scene CSV: one row per vehicle state, road geometry repeated per row so
//! several scenes can share one file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{RoadGeometry, Scene, VehicleState};
use crate::error::{Error, Result};

const HEADER: [&str; 11] = [
    "scene_id",
    "lane_count",
    "lane_width",
    "vehicle_id",
    "frame",
    "lane_id",
    "x_long",
    "x_lat",
    "v_long",
    "v_lat",
    "theta",
];

pub fn write_scenes<W: Write>(scenes: &[(u32, Scene)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let map_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(map_err)?;
    for (id, scene) in scenes {
        let road = scene.road();
        for s in scene.states() {
            w.write_record([
                id.to_string(),
                road.lane_count().to_string(),
                road.lane_width().to_string(),
                s.vehicle_id.to_string(),
                s.frame.to_string(),
                s.lane_id.to_string(),
                s.x_long.to_string(),
                s.x_lat.to_string(),
                s.v_long.to_string(),
                s.v_lat.to_string(),
                s.theta.to_string(),
            ])
            .map_err(map_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_scenes(scenes: &[(u32, Scene)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_scenes(scenes, std::io::BufWriter::new(file))
}

pub fn load_scenes(path: impl AsRef<Path>) -> Result<Vec<(u32, Scene)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_scenes(file)
}

pub fn read_scenes<R: Read>(reader: R) -> Result<Vec<(u32, Scene)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::validation(format!("scene header: {}", e)))?
        .clone();
    for name in HEADER {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let pos = |name: &str| headers.iter().position(|h| h == name).expect("checked");
    let idx: Vec<usize> = HEADER.iter().map(|h| pos(h)).collect();

    let mut grouped: BTreeMap<u32, (RoadGeometry, Vec<VehicleState>)> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::validation(format!("scene row {}: {}", line + 1, e)))?;
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        let bad = |k: usize| {
            Error::validation(format!(
                "scene row {}: bad {} `{}`",
                line + 1,
                HEADER[k],
                get(k)
            ))
        };
        macro_rules! parse {
            ($k:expr, $t:ty) => {
                get($k).parse::<$t>().map_err(|_| bad($k))?
            };
        }
        let scene_id = parse!(0, u32);
        let road = RoadGeometry::new(parse!(1, usize), parse!(2, f64))?;
        let state = VehicleState {
            vehicle_id: parse!(3, i64),
            frame: parse!(4, i64),
            lane_id: parse!(5, i32),
            x_long: parse!(6, f64),
            x_lat: parse!(7, f64),
            v_long: parse!(8, f64),
            v_lat: parse!(9, f64),
            theta: parse!(10, f64),
        };
        let entry = grouped.entry(scene_id).or_insert_with(|| (road, Vec::new()));
        if entry.0 != road {
            return Err(Error::validation(format!(
                "scene {} has inconsistent road geometry",
                scene_id
            )));
        }
        entry.1.push(state);
    }
    grouped
        .into_iter()
        .map(|(id, (road, states))| Ok((id, Scene::from_states(road, states)?)))
        .collect()
}
