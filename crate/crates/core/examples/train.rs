//! Trains a small VBIN on simulated scenes and saves the checkpoint and
//! loss history to a directory (default: `target/vbin-example`).

use std::fs::{self, File};
use std::path::PathBuf;

use vbin::model::save_checkpoint;
use vbin::simulator::{generate_dataset, SimConfig};
use vbin::training::{train, write_history, TrainConfig};

fn main() -> vbin::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("target/vbin-example"), PathBuf::from);
    let data = generate_dataset(&SimConfig::default(), 2, 21)?;
    let config = TrainConfig {
        gru_hidden: 32,
        epochs: 5,
        samples_per_epoch: 2048,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train(&data.samples, &config)?;
    for e in &outcome.history {
        println!("epoch {:2}  train {:.4}  val {:?}", e.epoch, e.train_nll, e.val_nll.map(|v| (v * 1e4).round() / 1e4));
    }
    fs::create_dir_all(&out)?;
    save_checkpoint(&outcome.checkpoint, out.join("model.vbck"))?;
    write_history(&outcome.history, File::create(out.join("history.csv"))?)?;
    println!("best epoch {}; saved to {}", outcome.best_epoch, out.display());
    Ok(())
}
