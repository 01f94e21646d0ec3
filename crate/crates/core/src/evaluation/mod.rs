//! Lane-change metrics over per-frame predictions: precision, recall and
//! F1 with two positive classes, critical misclassifications, NLL by
//! time-to-lane-change, and average prediction time.

mod io;

use std::collections::BTreeMap;

pub use io::{read_records, write_bins_csv, write_distribution_csv, write_records, write_report_kv, write_report_table};

use crate::datamodel::{Behavior, LabeledSample, Ttlc, FRAME_RATE_HZ, EVENT_HISTORY_FRAMES};
use crate::error::{Error, Result};

/// Critical false negatives have a TTLC below this, in seconds.
pub const CRITICAL_FN_TTLC: f64 = 1.5;
/// Critical false positives have a TTLC above this, in seconds.
pub const CRITICAL_FP_TTLC: f64 = 5.5;
/// Longest run of missed frames that still counts as a consistent prediction.
pub const MAX_PREDICTION_GAP: i64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionRecord {
    pub event_id: u64,
    pub frame: i64,
    pub ttlc: Ttlc,
    pub label: Behavior,
    pub probs: [f64; 3],
}

impl PredictionRecord {
    /// Class of maximum likelihood; ties go to the lower class index.
    pub fn predicted(&self) -> Behavior {
        let mut best = 0;
        for k in 1..3 {
            if self.probs[k] > self.probs[best] {
                best = k;
            }
        }
        Behavior::from_index(best).expect("three classes")
    }
}

pub fn records_from(samples: &[LabeledSample], probs: &[[f64; 3]]) -> Result<Vec<PredictionRecord>> {
    if samples.len() != probs.len() {
        return Err(Error::shape(format!(
            "{} samples but {} predictions",
            samples.len(),
            probs.len()
        )));
    }
    Ok(samples
        .iter()
        .zip(probs)
        .map(|(s, p)| PredictionRecord {
            event_id: s.event_id,
            frame: s.frame,
            ttlc: s.ttlc,
            label: s.label,
            probs: *p,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricOptions {
    /// Count an LC frame predicted as the other LC direction as a false positive.
    pub wrong_direction_is_fp: bool,
    /// Leave LC events without a consistent prediction out of the average
    /// prediction time instead of counting them as zero.
    pub exclude_unpredicted_events: bool,
    pub bin_width: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            wrong_direction_is_fp: true,
            exclude_unpredicted_events: false,
            bin_width: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accuracy {
    pub true_positives: usize,
    pub false_positives: usize,
    pub critical_true_positives: usize,
    pub critical_false_negatives: usize,
    /// `None` when undefined (zero denominator).
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn in_critical_fn_window(r: &PredictionRecord) -> bool {
    r.label.is_lane_change() && r.ttlc.seconds().is_some_and(|t| t < CRITICAL_FN_TTLC)
}

pub fn compute_accuracy(records: &[PredictionRecord], options: &MetricOptions) -> Accuracy {
    let mut a = Accuracy::default();
    for r in records {
        let p = r.predicted();
        if r.label.is_lane_change() {
            if p == r.label {
                a.true_positives += 1;
            } else if p.is_lane_change() && options.wrong_direction_is_fp {
                a.false_positives += 1;
            }
        } else if p.is_lane_change() {
            a.false_positives += 1;
        }
        if in_critical_fn_window(r) {
            if p == r.label {
                a.critical_true_positives += 1;
            } else {
                a.critical_false_negatives += 1;
            }
        }
    }
    a.precision = ratio(a.true_positives, a.true_positives + a.false_positives);
    a.recall = ratio(
        a.critical_true_positives,
        a.critical_true_positives + a.critical_false_negatives,
    );
    a.f1 = match (a.precision, a.recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    a
}

/// (critical false negatives, critical false positives).
pub fn critical_counts(records: &[PredictionRecord]) -> (usize, usize) {
    let fns = records
        .iter()
        .filter(|r| in_critical_fn_window(r) && r.predicted() != r.label)
        .count();
    let fps = records
        .iter()
        .filter(|r| r.ttlc.as_f64() > CRITICAL_FP_TTLC && r.predicted().is_lane_change())
        .count();
    (fns, fps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TtlcBin {
    /// Bin covers `(lo, hi]` seconds.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean_nll: Option<f64>,
    /// Mean predicted probability per class.
    pub mean_probs: Option<[f64; 3]>,
}

fn bins(records: &[PredictionRecord], bin_width: f64) -> Result<Vec<TtlcBin>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {}", bin_width)));
    }
    let horizon = EVENT_HISTORY_FRAMES as f64 / FRAME_RATE_HZ;
    let n = (horizon / bin_width - 1e-9).ceil() as usize;
    let mut sums = vec![(0usize, 0.0, [0.0; 3]); n];
    // Fixed summation order keeps the means independent of record order.
    let mut ordered: Vec<&PredictionRecord> = records.iter().collect();
    ordered.sort_by_key(|r| (r.event_id, r.frame));
    for r in ordered {
        let Some(t) = r.ttlc.seconds() else { continue };
        if !(t > 0.0 && t <= horizon + 1e-9) {
            continue;
        }
        let k = ((t / bin_width - 1e-9).ceil() as usize).clamp(1, n) - 1;
        let s = &mut sums[k];
        s.0 += 1;
        s.1 -= r.probs[r.label.index()].ln();
        for c in 0..3 {
            s.2[c] += r.probs[c];
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(k, (count, nll, probs))| TtlcBin {
            lo: k as f64 * bin_width,
            hi: ((k + 1) as f64 * bin_width).min(horizon),
            count,
            mean_nll: (count > 0).then(|| nll / count as f64),
            mean_probs: (count > 0).then(|| probs.map(|p| p / count as f64)),
        })
        .collect())
}

/// Mean NLL of the true class per TTLC bin `(k w, (k+1) w]` over `(0, 8]`.
pub fn nll_vs_ttlc(records: &[PredictionRecord], bin_width: f64) -> Result<Vec<TtlcBin>> {
    bins(records, bin_width)
}

/// Per LC event, the TTLC at which a consistent run of correct-direction
/// predictions starts, with the run extending to the event's last frame and
/// no gap above [`MAX_PREDICTION_GAP`] missed frames. Returns the mean over
/// LC events, or `None` if there are none (or none qualify when excluded).
pub fn average_prediction_time(records: &[PredictionRecord], options: &MetricOptions) -> Option<f64> {
    let times = prediction_times(records);
    let used: Vec<f64> = times
        .values()
        .filter_map(|t| match t {
            Some(t) => Some(*t),
            None if options.exclude_unpredicted_events => None,
            None => Some(0.0),
        })
        .collect();
    (!used.is_empty()).then(|| used.iter().sum::<f64>() / used.len() as f64)
}

/// Prediction time per LC event id; `None` where no run qualifies.
pub fn prediction_times(records: &[PredictionRecord]) -> BTreeMap<u64, Option<f64>> {
    let mut events: BTreeMap<u64, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        events.entry(r.event_id).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (id, mut recs) in events {
        let Some(direction) = recs.iter().map(|r| r.label).find(|l| l.is_lane_change()) else {
            continue;
        };
        recs.sort_by_key(|r| r.frame);
        let last = recs.last().expect("non-empty").frame;
        let correct: Vec<&PredictionRecord> = recs.iter().copied().filter(|r| r.predicted() == direction).collect();
        let time = match correct.last() {
            Some(end) if last - end.frame <= MAX_PREDICTION_GAP => {
                let mut start = correct.len() - 1;
                while start > 0 && correct[start].frame - correct[start - 1].frame - 1 <= MAX_PREDICTION_GAP {
                    start -= 1;
                }
                correct[start].ttlc.seconds()
            }
            _ => None,
        };
        out.insert(id, time);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub accuracy: Accuracy,
    pub critical_fn: usize,
    pub critical_fp: usize,
    pub bins: Vec<TtlcBin>,
    pub average_prediction_time: Option<f64>,
    pub lc_events: usize,
    pub frames: usize,
    pub options: MetricOptions,
}

pub fn evaluate_records(records: &[PredictionRecord], options: &MetricOptions) -> Result<MetricsReport> {
    let (critical_fn, critical_fp) = critical_counts(records);
    Ok(MetricsReport {
        accuracy: compute_accuracy(records, options),
        critical_fn,
        critical_fp,
        bins: nll_vs_ttlc(records, options.bin_width)?,
        average_prediction_time: average_prediction_time(records, options),
        lc_events: prediction_times(records).len(),
        frames: records.len(),
        options: *options,
    })
}
