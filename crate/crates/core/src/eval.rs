//! Prequential (test-then-train) evaluation with windowed recall and G-mean.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::OnlineClassifier;
use crate::model::{LabeledExample, DEFAULT_DRIFT_END, DEFAULT_DRIFT_START};

pub const DEFAULT_EVAL_WINDOW: usize = 1000;
/// Index from which the "start" snapshot and stream means are taken, past the learners' warm-up.
pub const DEFAULT_WARMUP: u64 = 20_000;

/// Last `W` (true, predicted) pairs with incrementally maintained counters.
#[derive(Clone, Debug)]
pub struct WindowedConfusion {
    capacity: usize,
    buffer: VecDeque<(usize, usize)>,
    support: Vec<usize>,
    true_positive: Vec<usize>,
}

impl WindowedConfusion {
    pub fn new(n_classes: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "window must hold at least one example");
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
            support: vec![0; n_classes],
            true_positive: vec![0; n_classes],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        if self.buffer.len() == self.capacity {
            let (t, p) = self.buffer.pop_front().expect("full buffer");
            self.support[t] -= 1;
            if t == p {
                self.true_positive[t] -= 1;
            }
        }
        self.buffer.push_back((truth, predicted));
        self.support[truth] += 1;
        if truth == predicted {
            self.true_positive[truth] += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn true_positives(&self) -> &[usize] {
        &self.true_positive
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.buffer.iter()
    }
}

/// Recall per class; `None` for classes with no example in the window.
pub fn recall_per_class(confusion: &WindowedConfusion) -> Vec<Option<f64>> {
    recall_from_counts(confusion.true_positives(), confusion.support())
}

pub fn recall_from_counts(tp: &[usize], support: &[usize]) -> Vec<Option<f64>> {
    tp.iter()
        .zip(support)
        .map(|(&tp, &s)| (s > 0).then(|| tp as f64 / s as f64))
        .collect()
}

/// Geometric mean of the given recalls; 1.0 for an empty set.
pub fn gmean(recalls: &[f64]) -> f64 {
    if recalls.is_empty() {
        return 1.0;
    }
    if recalls.iter().any(|r| *r <= 0.0) {
        return 0.0;
    }
    let log_sum: f64 = recalls.iter().map(|r| r.ln()).sum();
    (log_sum / recalls.len() as f64).exp()
}

/// G-mean over the present classes only.
pub fn gmean_present(recalls: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = recalls.iter().flatten().copied().collect();
    gmean(&present)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Number of examples processed so far.
    pub t: u64,
    pub recalls: Vec<Option<f64>>,
    pub gmean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPoints {
    pub start: u64,
    pub pre: u64,
    pub post: u64,
}

impl Default for SnapshotPoints {
    fn default() -> Self {
        Self { start: DEFAULT_WARMUP, pre: DEFAULT_DRIFT_START, post: DEFAULT_DRIFT_END }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshots {
    pub start: Option<f64>,
    pub pre: Option<f64>,
    pub post: Option<f64>,
    pub end: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSeries {
    pub window: usize,
    pub points: Vec<SeriesPoint>,
    /// Examples consumed (each predicted once, then trained once).
    pub examples: u64,
}

impl EvalSeries {
    /// G-mean of the series point at exactly `t`.
    pub fn gmean_at(&self, t: u64) -> Option<f64> {
        self.points.binary_search_by_key(&t, |p| p.t).ok().map(|i| self.points[i].gmean)
    }

    /// Mean of windowed G-means for points with `t > from_t`.
    pub fn mean_gmean(&self, from_t: u64) -> f64 {
        let vals: Vec<f64> = self.points.iter().filter(|p| p.t > from_t).map(|p| p.gmean).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    pub fn snapshots(&self, at: SnapshotPoints) -> Snapshots {
        Snapshots {
            start: self.gmean_at(at.start),
            pre: self.gmean_at(at.pre),
            post: self.gmean_at(at.post),
            end: self.points.last().map(|p| p.gmean),
        }
    }
}

/// Predicts, records, then trains on each example; emits a point every `window` examples.
pub fn prequential_run<C, I>(stream: I, classifier: &mut C, n_classes: usize, window: usize) -> EvalSeries
where
    C: OnlineClassifier + ?Sized,
    I: IntoIterator<Item = LabeledExample>,
{
    let mut confusion = WindowedConfusion::new(n_classes, window);
    let mut series = EvalSeries { window, ..Default::default() };
    for ex in stream {
        let predicted = classifier.predict(&ex.x);
        confusion.record(ex.y, predicted);
        classifier.train(&ex.x, ex.y);
        series.examples += 1;
        if series.examples.is_multiple_of(window as u64) {
            let recalls = recall_per_class(&confusion);
            let g = gmean_present(&recalls);
            series.points.push(SeriesPoint { t: series.examples, recalls, gmean: g });
        }
    }
    // a stream shorter than the window is scored as one window
    if series.points.is_empty() && series.examples > 0 {
        let recalls = recall_per_class(&confusion);
        let g = gmean_present(&recalls);
        series.points.push(SeriesPoint { t: series.examples, recalls, gmean: g });
    }
    series
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn write_results_header<W: Write>(out: &mut W, n_classes: usize) -> std::io::Result<()> {
    let mut cols = vec!["t".to_string(), "classifier".into(), "stream_id".into()];
    cols.extend((0..n_classes).map(|k| format!("recall_c{k}")));
    cols.push("gmean".into());
    writeln!(out, "{}", cols.join(","))
}

pub fn write_results_rows<W: Write>(
    out: &mut W,
    series: &EvalSeries,
    classifier: &str,
    stream_id: &str,
) -> std::io::Result<()> {
    for p in &series.points {
        let recalls: Vec<String> = p.recalls.iter().map(|r| fmt_opt(*r)).collect();
        writeln!(out, "{},{},{},{},{:.6}", p.t, classifier, stream_id, recalls.join(","), p.gmean)?;
    }
    Ok(())
}

pub const SNAPSHOT_HEADER: &str = "stream_id,classifier,start,pre,post,end";

pub fn write_snapshot_row<W: Write>(
    out: &mut W,
    stream_id: &str,
    classifier: &str,
    snaps: &Snapshots,
) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{}",
        stream_id,
        classifier,
        fmt_opt(snaps.start),
        fmt_opt(snaps.pre),
        fmt_opt(snaps.post),
        fmt_opt(snaps.end)
    )
}
