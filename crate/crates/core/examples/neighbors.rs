//! Neighbor slots and connection features for one target in a simulated scene.

use vbin::features::{connection_feature, extract_maneuver_features, select_neighbors, Slot};
use vbin::simulator::{simulate_scene, SimConfig};

fn main() -> vbin::Result<()> {
    let cfg = SimConfig {
        duration_frames: 120,
        ..SimConfig::default()
    };
    let scene = simulate_scene(&cfg, 5)?;
    let (target, t) = (3, 100);
    let me = scene.state(target, t).expect("vehicle present");
    println!("vehicle {} at frame {}: lane {}, x_long {:.1} m, v {:.1} m/s", target, t, me.lane_id, me.x_long, me.v_long);

    let seq = extract_maneuver_features(&scene, target, t)?;
    let last = seq.rows()[19];
    println!("last maneuver row: d_lat_clc {:.3}, v_long {:.2}, v_lat {:.3}", last[2], last[3], last[4]);

    let slots = select_neighbors(&scene, target, t)?;
    println!("{:14} {:>8} {:>9} {:>8} {:>8}", "slot", "vehicle", "dx_long", "dx_lat", "v_nbr");
    for (kind, slot) in slots.iter() {
        let c = connection_feature(&scene, target, kind, slot, t)?;
        let who = match slot {
            Slot::Vehicle(id) => id.to_string(),
            Slot::Virtual => "virtual".into(),
        };
        println!("{:14} {:>8} {:>9.2} {:>8.2} {:>8.2}", format!("{:?}", kind), who, c[0], c[1], c[4]);
    }
    Ok(())
}
