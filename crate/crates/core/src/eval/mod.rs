//! Windowed detection, event-level metrics, operating curves and
//! cross-validation statistics.

mod curves;
mod cv;
mod metrics;

pub use curves::{det_curve, roc_curve, score_thresholds, CurveKind, CurvePoint, CurvePoints};
pub use cv::{cross_validate, nb_variance, CvSummary, FoldResult};
pub use metrics::{collapsed_false_positives, score_clips, score_events, ClassMetrics, MetricsReport};

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::classifier::{decide_scores, Decision, MultiClassModel};
use crate::cope::{bank_responses, frame_range, pool_vector, CopeBank, CopeFeatureVector, CopeResponse};
use crate::error::{Error, Result};
use crate::gammatone::{design_filterbank, gammatonegram, Filterbank, Gammatonegram};
use crate::peaks::extract_peaks;

/// Sliding-window geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    /// Window length `T_w`, seconds.
    pub window_s: f64,
    /// Forward shift `dT_w`, seconds.
    pub hop_s: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            window_s: 3.0,
            hop_s: 0.5,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop_s > 0.0 && self.hop_s.is_finite() && self.window_s >= self.hop_s && self.window_s.is_finite()) {
            return Err(Error::Validation(format!(
                "window {} s / hop {} s: need window >= hop > 0",
                self.window_s, self.hop_s
            )));
        }
        Ok(())
    }

    /// Number of windows `[k hop, k hop + window]` inside `duration_s`.
    pub fn count(&self, duration_s: f64) -> usize {
        if duration_s < self.window_s {
            return 0;
        }
        ((duration_s - self.window_s) / self.hop_s + 1e-9).floor() as usize + 1
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        let start = k as f64 * self.hop_s;
        (start, start + self.window_s)
    }
}

/// Classifier output for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub window: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub decision: Decision,
    pub scores: Vec<f64>,
}

/// Records of one stream plus a warning when nothing could be analyzed.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub records: Vec<DetectionRecord>,
    pub warning: Option<String>,
}

/// Pools `responses` over `[start_s, end_s]`. When `g` is normalized the
/// vector is rescaled as if the window alone had been normalized: every
/// response is linear in the energy scale, so this divides by the largest
/// energy among the window's frames.
pub fn window_vector(
    g: &Gammatonegram,
    responses: &[CopeResponse],
    start_s: f64,
    end_s: f64,
) -> Result<CopeFeatureVector> {
    let mut v = pool_vector(responses, start_s, end_s)?;
    if g.is_normalized() {
        let range = frame_range(g.frontend(), g.frames(), start_s, end_s)?;
        let peak = (0..g.channels())
            .flat_map(|k| g.channel(k)[range.clone()].iter().copied())
            .fold(0.0, f64::max);
        if peak > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= peak);
        }
    }
    Ok(v)
}

/// Slides a window over `stream`, pooling the bank responses over each
/// window and classifying the resulting feature vector.
pub fn sliding_detection(
    stream: &AudioClip,
    bank: &CopeBank,
    model: &MultiClassModel,
    windows: WindowParams,
) -> Result<Detection> {
    let fb = design_filterbank(&bank.frontend().filterbank)?;
    sliding_detection_with(stream, &fb, bank, model, windows)
}

/// [`sliding_detection`] with a prebuilt filterbank.
pub fn sliding_detection_with(
    stream: &AudioClip,
    fb: &Filterbank,
    bank: &CopeBank,
    model: &MultiClassModel,
    windows: WindowParams,
) -> Result<Detection> {
    windows.validate()?;
    if model.dim() != bank.len() {
        return Err(Error::Dimension {
            expected: bank.len(),
            found: model.dim(),
        });
    }
    let count = windows.count(stream.duration_s());
    let frame_size = bank.frontend().frame_size;
    if count == 0 || stream.len() < frame_size {
        let warning = format!(
            "stream of {:.3} s is shorter than the {} s window; no windows analyzed",
            stream.duration_s(),
            windows.window_s
        );
        log::warn!("{warning}");
        return Ok(Detection {
            records: Vec::new(),
            warning: Some(warning),
        });
    }
    let g = gammatonegram(stream, fb, frame_size, bank.frontend().normalize)?;
    let c = extract_peaks(&g);
    let responses = bank_responses(&c, bank)?;
    let records = (0..count)
        .map(|k| {
            let (start_s, end_s) = windows.interval(k);
            let v = window_vector(&g, &responses, start_s, end_s)?;
            let scores = model.scores(&v.values)?;
            Ok(DetectionRecord {
                window: k,
                start_s,
                end_s,
                decision: decide_scores(&scores),
                scores,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Detection {
        records,
        warning: None,
    })
}

/// CSV `window,start_s,end_s,decision,score_<class>...`; the decision column
/// holds a class label or `reject`.
pub fn write_records<W: Write>(records: &[DetectionRecord], classes: &[String], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["window".to_string(), "start_s".into(), "end_s".into(), "decision".into()];
    header.extend(classes.iter().map(|c| format!("score_{c}")));
    w.write_record(&header)?;
    for r in records {
        if r.scores.len() != classes.len() {
            return Err(Error::Dimension {
                expected: classes.len(),
                found: r.scores.len(),
            });
        }
        let decision = match r.decision {
            Decision::Reject => "reject".to_string(),
            Decision::Class(k) => classes[k].clone(),
        };
        let mut row = vec![r.window.to_string(), r.start_s.to_string(), r.end_s.to_string(), decision];
        row.extend(r.scores.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses [`write_records`] output, returning the class list from the header.
pub fn read_records<R: Read>(source: R) -> Result<(Vec<DetectionRecord>, Vec<String>)> {
    let mut rd = csv::Reader::from_reader(source);
    let header = rd.headers()?.clone();
    let fixed = ["window", "start_s", "end_s", "decision"];
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::parse(1, "expected header `window,start_s,end_s,decision,score_...`"));
    }
    let classes: Vec<String> = header
        .iter()
        .skip(4)
        .map(|h| {
            h.strip_prefix("score_")
                .map(str::to_string)
                .ok_or_else(|| Error::parse(1, format!("bad score column `{h}`")))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != header.len() {
            return Err(Error::parse(line, "wrong number of fields"));
        }
        let num = |k: usize| -> Result<f64> {
            row[k]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad number `{}`", &row[k])))
        };
        let decision = match row[3].trim() {
            "reject" => Decision::Reject,
            label => Decision::Class(
                classes
                    .iter()
                    .position(|c| c == label)
                    .ok_or_else(|| Error::parse(line, format!("unknown class `{label}`")))?,
            ),
        };
        records.push(DetectionRecord {
            window: row[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, "bad window index"))?,
            start_s: num(1)?,
            end_s: num(2)?,
            decision,
            scores: (4..row.len()).map(num).collect::<Result<_>>()?,
        });
    }
    Ok((records, classes))
}
