use std::fmt;

use serde::{Deserialize, Serialize};

use super::DetectionRecord;
use crate::audio::GroundTruth;
use crate::classifier::Decision;
use crate::error::{Error, Result};

/// Per-class event accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub events: usize,
    pub correct: usize,
    pub misclassified: usize,
    pub missed: usize,
    pub rr: Option<f64>,
    pub er: Option<f64>,
    pub mdr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

/// Aggregated detection metrics.
///
/// JSON schema: every field below, rates as numbers in `[0, 1]` or `null`
/// when their denominator is zero. `confusion[i][j]` counts events of class
/// `i` assigned to class `j`; the last column (`j = M`) counts missed events.
/// Precision, recall and F are macro averages of the per-class values
/// derived from the confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub events: usize,
    pub correct: usize,
    pub misclassified: usize,
    pub missed: usize,
    pub rr: Option<f64>,
    pub er: Option<f64>,
    pub mdr: Option<f64>,
    /// False positives after collapsing consecutive windows.
    pub false_positives: usize,
    /// Windows overlapping no event.
    pub background_windows: usize,
    pub fpr: Option<f64>,
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// False positives in a run of consecutive windows: each pair of
/// consecutive false-positive windows counts once, so a run of `n` costs
/// `ceil(n / 2)`.
pub fn collapsed_false_positives(fp: &[bool]) -> usize {
    let mut total = 0;
    let mut run = 0usize;
    for &f in fp.iter().chain([&false]) {
        if f {
            run += 1;
        } else {
            total += run.div_ceil(2);
            run = 0;
        }
    }
    total
}

impl MetricsReport {
    fn assemble(
        classes: &[String],
        confusion: Vec<Vec<usize>>,
        false_positives: usize,
        background_windows: usize,
    ) -> Self {
        let m = classes.len();
        let mut per_class = Vec::with_capacity(m);
        for (c, label) in classes.iter().enumerate() {
            let row = &confusion[c];
            let events: usize = row.iter().sum();
            let correct = row[c];
            let missed = row[m];
            let misclassified = events - correct - missed;
            let predicted: usize = (0..m).map(|r| confusion[r][c]).sum();
            let precision = ratio(correct, predicted);
            let recall = ratio(correct, events);
            let f_measure = match (precision, recall) {
                (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            };
            per_class.push(ClassMetrics {
                label: label.clone(),
                events,
                correct,
                misclassified,
                missed,
                rr: ratio(correct, events),
                er: ratio(misclassified, events),
                mdr: ratio(missed, events),
                precision,
                recall,
                f_measure,
            });
        }
        let events: usize = per_class.iter().map(|c| c.events).sum();
        let correct: usize = per_class.iter().map(|c| c.correct).sum();
        let misclassified: usize = per_class.iter().map(|c| c.misclassified).sum();
        let missed: usize = per_class.iter().map(|c| c.missed).sum();
        let precision = mean(per_class.iter().map(|c| c.precision));
        let recall = mean(per_class.iter().map(|c| c.recall));
        let f_measure = mean(per_class.iter().map(|c| c.f_measure));
        Self {
            classes: classes.to_vec(),
            events,
            correct,
            misclassified,
            missed,
            rr: ratio(correct, events),
            er: ratio(misclassified, events),
            mdr: ratio(missed, events),
            false_positives,
            background_windows,
            fpr: ratio(false_positives, background_windows),
            confusion,
            per_class,
            precision,
            recall,
            f_measure,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("metrics json: {e}")))
    }
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1.min(b.1) - a.0.max(b.0) > 0.0
}

/// Event-level scoring of one stream.
///
/// An event is detected when at least one overlapping window decides its
/// class, misclassified when none does but some window decides another
/// class, and missed when every overlapping window rejects. Non-reject
/// decisions in windows overlapping no event are false positives, with
/// consecutive ones collapsed by [`collapsed_false_positives`]; FPR divides
/// by the number of such background windows.
pub fn score_events(records: &[DetectionRecord], truth: &GroundTruth, classes: &[String]) -> Result<MetricsReport> {
    truth.check_labels(classes)?;
    let m = classes.len();
    let mut sorted: Vec<&DetectionRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.window);
    for r in &sorted {
        if let Decision::Class(k) = r.decision {
            if k >= m {
                return Err(Error::Validation(format!("window {} decides unknown class {k}", r.window)));
            }
        }
    }
    let mut confusion = vec![vec![0usize; m + 1]; m];
    for e in truth.entries() {
        let c = classes.iter().position(|l| *l == e.label).expect("labels checked");
        let mut votes = vec![0usize; m];
        for r in sorted.iter().filter(|r| overlaps((r.start_s, r.end_s), (e.start_s, e.end_s))) {
            if let Decision::Class(k) = r.decision {
                votes[k] += 1;
            }
        }
        let column = if votes[c] > 0 {
            c
        } else {
            // Most frequent wrong class, lowest index on ties.
            let (best, n) = votes
                .iter()
                .enumerate()
                .fold((m, 0), |(bi, bn), (k, &n)| if n > bn { (k, n) } else { (bi, bn) });
            if n > 0 {
                best
            } else {
                m
            }
        };
        confusion[c][column] += 1;
    }

    let background: Vec<&&DetectionRecord> = sorted
        .iter()
        .filter(|r| !truth.entries().iter().any(|e| overlaps((r.start_s, r.end_s), (e.start_s, e.end_s))))
        .collect();
    // Runs break at event windows and at gaps in the window sequence.
    let mut false_positives = 0;
    let mut run: Vec<bool> = Vec::new();
    let mut last: Option<usize> = None;
    for r in &background {
        if last.is_some_and(|l| r.window != l + 1) {
            false_positives += collapsed_false_positives(&run);
            run.clear();
        }
        run.push(r.decision != Decision::Reject);
        last = Some(r.window);
    }
    false_positives += collapsed_false_positives(&run);
    Ok(MetricsReport::assemble(classes, confusion, false_positives, background.len()))
}

/// Clip-level scoring: each labeled clip is one event with a single
/// decision; clips labeled `None` are background, and any class decision on
/// them is a false positive (clips are independent, so nothing collapses).
pub fn score_clips(truth: &[Option<usize>], decisions: &[Decision], classes: &[String]) -> Result<MetricsReport> {
    if truth.len() != decisions.len() {
        return Err(Error::Validation(format!(
            "{} labels but {} decisions",
            truth.len(),
            decisions.len()
        )));
    }
    let m = classes.len();
    let mut confusion = vec![vec![0usize; m + 1]; m];
    let (mut false_positives, mut background) = (0, 0);
    for (&t, d) in truth.iter().zip(decisions) {
        let column = match *d {
            Decision::Reject => m,
            Decision::Class(k) if k < m => k,
            Decision::Class(k) => return Err(Error::Validation(format!("class index {k} out of range"))),
        };
        match t {
            Some(t) if t < m => confusion[t][column] += 1,
            Some(t) => return Err(Error::Validation(format!("class index {t} out of range"))),
            None => {
                background += 1;
                false_positives += usize::from(column != m);
            }
        }
    }
    Ok(MetricsReport::assemble(classes, confusion, false_positives, background))
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{:.2}%", 100.0 * x))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>7} {:>8} {:>8} {:>8} {:>8}", "class", "events", "RR", "ER", "MDR", "F")?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<16} {:>7} {:>8} {:>8} {:>8} {:>8}",
                c.label,
                c.events,
                pct(c.rr),
                pct(c.er),
                pct(c.mdr),
                pct(c.f_measure)
            )?;
        }
        writeln!(
            f,
            "{:<16} {:>7} {:>8} {:>8} {:>8} {:>8}",
            "all",
            self.events,
            pct(self.rr),
            pct(self.er),
            pct(self.mdr),
            pct(self.f_measure)
        )?;
        writeln!(
            f,
            "FPR {} ({} false positives / {} background windows)",
            pct(self.fpr),
            self.false_positives,
            self.background_windows
        )?;
        writeln!(f, "confusion (rows: true class, last column: missed)")?;
        for (label, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|n| format!("{n:>5}")).collect();
            writeln!(f, "{label:<16} {}", cells.join(""))?;
        }
        Ok(())
    }
}
