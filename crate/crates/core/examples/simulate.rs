//! Simulates a few highway scenes and prints class balance.

use vbin::simulator::{generate_dataset, SimConfig};

fn main() -> vbin::Result<()> {
    let scenes: usize = std::env::args().nth(1).map_or(Ok(4), |s| s.parse()).unwrap_or(4);
    let config = SimConfig::default();
    let data = generate_dataset(&config, scenes, 7)?;
    let r = &data.report;
    println!("scenes            {}", r.scenes);
    println!("lane-change events {}", r.lc_events);
    println!("samples           {}", data.samples.len());
    println!("LK / LCL / LCR    {} / {} / {}", r.class_counts[0], r.class_counts[1], r.class_counts[2]);
    Ok(())
}
