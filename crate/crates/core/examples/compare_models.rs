//! Trains VBIN and VLSTM on the same simulated scenes and scores both on
//! held-out scenes.
//!
//! cargo run --release --example compare_models -- [train_scenes] [epochs] [seed]

use std::time::Instant;

use vbin::evaluation::{evaluate_records, records_from, MetricOptions};
use vbin::simulator::{generate_dataset, interaction_auc, SimConfig};
use vbin::training::{train, TrainConfig};

fn main() -> vbin::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let train_scenes = args.first().copied().unwrap_or(4);
    let epochs = args.get(1).copied().unwrap_or(10);
    let seed = args.get(2).copied().unwrap_or(0) as u64;

    let cfg = SimConfig::default();
    let train_set = generate_dataset(&cfg, train_scenes, 1000 + seed)?;
    let test_set = generate_dataset(&cfg, 2, 2000 + seed)?;
    println!(
        "train {} samples, test {} samples, interaction AUC {:.3}",
        train_set.samples.len(),
        test_set.samples.len(),
        interaction_auc(&train_set.samples).unwrap_or(f64::NAN)
    );

    println!("model   secs  best  precision  recall     f1    apt  crit_fn  crit_fp");
    for model in ["vlstm", "vbin"] {
        let start = Instant::now();
        let tc = TrainConfig {
            model: model.into(),
            epochs,
            samples_per_epoch: 4096,
            validation_fraction: 0.25,
            validation_samples: 4096,
            balance_classes: false,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&train_set.samples, &tc)?;
        let probs = out.checkpoint.model.predict(&test_set.samples, 256)?;
        let r = evaluate_records(&records_from(&test_set.samples, &probs)?, &MetricOptions::default())?;
        let a = &r.accuracy;
        println!(
            "{:6} {:5.0} {:5} {:10.3} {:7.3} {:6.3} {:6.3} {:8} {:8}",
            model,
            start.elapsed().as_secs_f64(),
            out.best_epoch,
            a.precision.unwrap_or(f64::NAN),
            a.recall.unwrap_or(f64::NAN),
            a.f1.unwrap_or(f64::NAN),
            r.average_prediction_time.unwrap_or(f64::NAN),
            r.critical_fn,
            r.critical_fp
        );
    }
    Ok(())
}
