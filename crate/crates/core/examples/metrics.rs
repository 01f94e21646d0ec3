//! The metric suite on hand-made predictions for two lane-change events and
//! one lane-keeping track.

use vbin::datamodel::{Behavior, Ttlc};
use vbin::evaluation::{evaluate_records, prediction_times, write_report_table, MetricOptions, PredictionRecord};

fn record(event_id: u64, k: i64, label: Behavior, p: [f64; 3], lc: bool) -> PredictionRecord {
    PredictionRecord {
        event_id,
        frame: 1000 - k,
        ttlc: if lc { Ttlc::from_frames(k) } else { Ttlc::Never },
        label,
        probs: p,
    }
}

fn main() -> vbin::Result<()> {
    let sure = |b: Behavior| {
        let mut p = [0.05; 3];
        p[b.index()] = 0.9;
        p
    };
    let mut records = Vec::new();
    for k in 1..=80 {
        let lcl = if k <= 40 { Behavior::ChangeLeft } else { Behavior::LaneKeep };
        let lcr = if k <= 40 { Behavior::ChangeRight } else { Behavior::LaneKeep };
        // Event 1 predicted from 3.0 s, event 2 only from 1.2 s with a
        // brief flicker at 2.5 s, the LK track with two false alarms.
        let p1 = if k <= 30 { sure(Behavior::ChangeLeft) } else { sure(Behavior::LaneKeep) };
        let p2 = if k <= 12 || k == 25 { sure(Behavior::ChangeRight) } else { sure(Behavior::LaneKeep) };
        let p3 = if k == 10 || k == 11 { sure(Behavior::ChangeLeft) } else { sure(Behavior::LaneKeep) };
        records.push(record(1, k, lcl, p1, true));
        records.push(record(2, k, lcr, p2, true));
        records.push(record(3, k, Behavior::LaneKeep, p3, false));
    }
    let report = evaluate_records(&records, &MetricOptions::default())?;
    write_report_table(&report, std::io::stdout().lock())?;
    for (event, t) in prediction_times(&records) {
        println!("event {}: prediction time {:?}", event, t);
    }
    Ok(())
}
