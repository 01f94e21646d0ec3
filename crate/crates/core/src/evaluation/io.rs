use std::io::{Read, Write};

use super::{MetricsReport, PredictionRecord, TtlcBin};
use crate::datamodel::{Behavior, Ttlc};
use crate::error::{Error, Result};

const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{:?}", v))
}

fn report_rows(r: &MetricsReport) -> Vec<(&'static str, String)> {
    let a = &r.accuracy;
    vec![
        ("precision", opt(a.precision)),
        ("recall", opt(a.recall)),
        ("f1", opt(a.f1)),
        ("true_positives", a.true_positives.to_string()),
        ("false_positives", a.false_positives.to_string()),
        ("critical_true_positives", a.critical_true_positives.to_string()),
        ("critical_fn", r.critical_fn.to_string()),
        ("critical_fp", r.critical_fp.to_string()),
        ("average_prediction_time", opt(r.average_prediction_time)),
        ("lc_events", r.lc_events.to_string()),
        ("frames", r.frames.to_string()),
        ("recall_definition", "critical_tp/(critical_tp+critical_fn), ttlc<1.5".into()),
        ("wrong_direction_is_fp", r.options.wrong_direction_is_fp.to_string()),
        ("exclude_unpredicted_events", r.options.exclude_unpredicted_events.to_string()),
        ("bin_width", r.options.bin_width.to_string()),
    ]
}

/// Tab-delimited `metric<TAB>value` table with a header row.
pub fn write_report_table<W: Write>(report: &MetricsReport, mut w: W) -> Result<()> {
    writeln!(w, "metric\tvalue")?;
    for (k, v) in report_rows(report) {
        writeln!(w, "{}\t{}", k, v)?;
    }
    Ok(())
}

/// `key = value` lines; parses as TOML with undefined values quoted.
pub fn write_report_kv<W: Write>(report: &MetricsReport, mut w: W) -> Result<()> {
    for (k, v) in report_rows(report) {
        let numeric = v.parse::<f64>().is_ok() || v == "true" || v == "false";
        if numeric {
            writeln!(w, "{} = {}", k, v)?;
        } else {
            writeln!(w, "{} = {:?}", k, v)?;
        }
    }
    Ok(())
}

pub fn write_bins_csv<W: Write>(bins: &[TtlcBin], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["ttlc_lo", "ttlc_hi", "count", "mean_nll"])?;
    for b in bins {
        out.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string(), opt(b.mean_nll)])?;
    }
    out.flush()?;
    Ok(())
}

/// Mean predicted probability of each class per TTLC bin.
pub fn write_distribution_csv<W: Write>(bins: &[TtlcBin], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["ttlc_lo", "ttlc_hi", "count", "p_lk", "p_lcl", "p_lcr"])?;
    for b in bins {
        let p = b.mean_probs.map(|p| p.map(|v| v.to_string()));
        let [lk, lcl, lcr] = p.unwrap_or_else(|| [UNDEFINED.to_string(), UNDEFINED.to_string(), UNDEFINED.to_string()]);
        out.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string(), lk, lcl, lcr])?;
    }
    out.flush()?;
    Ok(())
}

const RECORD_HEADER: [&str; 8] = ["event_id", "frame", "ttlc", "label", "p_lk", "p_lcl", "p_lcr", "predicted"];

pub fn write_records<W: Write>(records: &[PredictionRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for r in records {
        let ttlc = r.ttlc.seconds().map_or_else(|| "inf".to_string(), |t| t.to_string());
        out.write_record([
            r.event_id.to_string(),
            r.frame.to_string(),
            ttlc,
            r.label.short_name().to_string(),
            r.probs[0].to_string(),
            r.probs[1].to_string(),
            r.probs[2].to_string(),
            r.predicted().short_name().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn behavior(name: &str) -> Option<Behavior> {
    Behavior::ALL.into_iter().find(|b| b.short_name() == name)
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx: Vec<usize> = RECORD_HEADER[..7].iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::validation(format!("record {}: bad {}", line + 1, what));
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let num = |k: usize| field(k).parse::<f64>().map_err(|_| bad(RECORD_HEADER[k]));
        let ttlc = match field(2) {
            "inf" => Ttlc::Never,
            _ => Ttlc::Seconds(num(2)?),
        };
        let probs = [num(4)?, num(5)?, num(6)?];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(bad("probabilities"));
        }
        out.push(PredictionRecord {
            event_id: field(0).parse().map_err(|_| bad("event_id"))?,
            frame: field(1).parse().map_err(|_| bad("frame"))?,
            ttlc,
            label: behavior(field(3)).ok_or_else(|| bad("label"))?,
            probs,
        });
    }
    Ok(out)
}
