use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{score_events, DetectionRecord};
use crate::audio::GroundTruth;
use crate::classifier::decide_with_threshold;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// `x = FPR`, `y = MDR`.
    Det,
    /// `x = FPR`, `y = RR = 1 - MDR - ER`.
    Roc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Operating points in increasing threshold order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

/// Distinct per-window maximum scores, bracketed by one value below and one
/// above, so the sweep runs from "nothing rejected" to "everything rejected".
pub fn score_thresholds(records: &[DetectionRecord]) -> Vec<f64> {
    let mut t: Vec<f64> = records
        .iter()
        .filter_map(|r| r.scores.iter().copied().reduce(f64::max))
        .filter(|v| v.is_finite())
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let lo = t.first().copied().unwrap_or(0.0) - 1.0;
    let hi = t.last().copied().unwrap_or(0.0) + 1.0;
    let mut out = vec![lo];
    out.extend(t);
    out.push(hi);
    out
}

fn sweep(
    kind: CurveKind,
    records: &[DetectionRecord],
    truth: &GroundTruth,
    classes: &[String],
    thresholds: &[f64],
) -> Result<CurvePoints> {
    if thresholds.len() < 2 {
        return Err(Error::Validation("a curve needs at least two thresholds".into()));
    }
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::Validation("threshold is NaN".into()));
    }
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    let mut relabeled = records.to_vec();
    let points = thresholds
        .into_iter()
        .map(|theta| {
            for (r, orig) in relabeled.iter_mut().zip(records) {
                r.decision = decide_with_threshold(&orig.scores, theta);
            }
            let m = score_events(&relabeled, truth, classes)?;
            let x = m.fpr.unwrap_or(0.0);
            let y = match kind {
                CurveKind::Det => m.mdr.unwrap_or(0.0),
                CurveKind::Roc => m.rr.unwrap_or(0.0),
            };
            Ok(CurvePoint { threshold: theta, x, y })
        })
        .collect::<Result<_>>()?;
    Ok(CurvePoints { kind, points })
}

/// DET curve: a window rejects iff its maximum score is below `theta`.
/// Undefined rates (no background windows, no events) are reported as 0.
pub fn det_curve(
    records: &[DetectionRecord],
    truth: &GroundTruth,
    classes: &[String],
    thresholds: &[f64],
) -> Result<CurvePoints> {
    sweep(CurveKind::Det, records, truth, classes, thresholds)
}

/// ROC curve over the same threshold sweep as [`det_curve`].
pub fn roc_curve(
    records: &[DetectionRecord],
    truth: &GroundTruth,
    classes: &[String],
    thresholds: &[f64],
) -> Result<CurvePoints> {
    sweep(CurveKind::Roc, records, truth, classes, thresholds)
}

impl CurvePoints {
    /// CSV `threshold,x,y`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["threshold", "x", "y"])?;
        for p in &self.points {
            w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Standalone SVG plot. DET curves use log-log axes over
    /// `[0.001, 1]`, clamping zero rates to the lower edge; ROC curves use
    /// linear unit axes.
    pub fn to_svg(&self) -> String {
        const W: f64 = 480.0;
        const H: f64 = 480.0;
        const PAD: f64 = 60.0;
        const FLOOR: f64 = 1e-3;
        let log = self.kind == CurveKind::Det;
        let map = |v: f64| -> f64 {
            if log {
                (v.max(FLOOR).log10() - FLOOR.log10()) / -FLOOR.log10()
            } else {
                v.clamp(0.0, 1.0)
            }
        };
        let px = |x: f64| PAD + map(x) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - map(y) * (H - 2.0 * PAD);
        let (xl, yl) = match self.kind {
            CurveKind::Det => ("false positive rate", "miss detection rate"),
            CurveKind::Roc => ("false positive rate", "recognition rate"),
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let ticks: Vec<f64> = if log {
            vec![0.001, 0.01, 0.1, 1.0]
        } else {
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        };
        for &t in &ticks {
            let (x, y) = (px(t), py(t));
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##,
                PAD,
                H - PAD,
                PAD,
                W - PAD
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"#,
                H - PAD + 16.0,
                PAD - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let path: Vec<String> = self
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#c03" stroke-width="2"/>"##,
            path.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xl}</text>"#,
            W / 2.0,
            H - 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{yl}</text>"#,
            H / 2.0,
            H / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}
