//! Ingests NGSIM-style rows (feet, 1-based lanes) and labels the result.
//!
//! Pass a file path to ingest real data; without one a synthetic
//! two-vehicle file is used, where vehicle 2 moves one lane left.

use vbin::datamodel::{ingest_ngsim, parse_ngsim, NgsimOptions, RoadGeometry};
use vbin::features::{build_samples, SampleOptions};

fn synthetic() -> String {
    let mut text = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,Lane_ID\n");
    for f in 0..200 {
        let t = f as f64 / 10.0;
        text += &format!("1,{},{:.3},{:.3},60.0,2\n", f, 18.0, 40.0 + 60.0 * t);
        // Lateral move from lane 3 to lane 2 (feet) between frames 90 and 130.
        let s = ((f as f64 - 90.0) / 40.0).clamp(0.0, 1.0);
        let x = 30.0 - 12.0 * (10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5));
        let lane = if x < 24.0 { 2 } else { 3 };
        text += &format!("2,{},{:.3},{:.3},66.0,{}\n", f, x, 66.0 * t, lane);
    }
    text
}

fn main() -> vbin::Result<()> {
    let mut options = NgsimOptions::new(RoadGeometry::new(6, 12.0 * 0.3048)?);
    options.unit_scale = 0.3048;
    let scene = match std::env::args().nth(1) {
        Some(path) => ingest_ngsim(path, &options)?,
        None => parse_ngsim(synthetic().as_bytes(), &options)?,
    };
    println!("{} vehicles, frames {:?}", scene.vehicle_count(), scene.frame_numbers().next()..scene.frame_numbers().last());
    let samples = build_samples(&scene, 0, &SampleOptions::default())?;
    let lc: Vec<_> = samples.iter().filter(|s| s.label.is_lane_change()).collect();
    println!("{} samples, {} labeled lane change", samples.len(), lc.len());
    if let (Some(first), Some(last)) = (lc.first(), lc.last()) {
        println!(
            "vehicle {} {}: ttlc {:?} .. {:?}",
            first.vehicle_id,
            first.label.short_name(),
            first.ttlc.seconds(),
            last.ttlc.seconds()
        );
    }
    Ok(())
}
