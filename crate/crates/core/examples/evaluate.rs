//! Loads a checkpoint (default: the one written by the `train` example) and
//! reports metrics and the NLL-by-TTLC profile on freshly simulated scenes.

use vbin::evaluation::{evaluate_records, records_from, MetricOptions};
use vbin::model::load_checkpoint;
use vbin::simulator::{generate_dataset, SimConfig};

fn main() -> vbin::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "target/vbin-example/model.vbck".into());
    let ckpt = load_checkpoint(&path)?;
    println!("{} model, GRU hidden {}", ckpt.model.kind().name(), ckpt.model.hidden());
    let test = generate_dataset(&SimConfig::default(), 1, 99)?;
    let probs = ckpt.model.predict(&test.samples, 256)?;
    let records = records_from(&test.samples, &probs)?;
    let r = evaluate_records(&records, &MetricOptions::default())?;
    let show = |v: Option<f64>| v.map_or("undefined".into(), |v| format!("{:.3}", v));
    println!(
        "precision {}  recall {}  F1 {}",
        show(r.accuracy.precision),
        show(r.accuracy.recall),
        show(r.accuracy.f1)
    );
    println!("critical FN {}  critical FP {}", r.critical_fn, r.critical_fp);
    println!("average prediction time {} s over {} events", show(r.average_prediction_time), r.lc_events);
    for b in r.bins.iter().step_by(2) {
        println!("ttlc ({:.1}, {:.1}]  NLL {}", b.lo, b.hi, show(b.mean_nll));
    }
    Ok(())
}
