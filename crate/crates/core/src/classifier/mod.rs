//! One-vs-all linear soft-margin SVMs with a cost factor and a reject class.
//!
//! Each binary scorer minimizes
//! `1/2 |w|^2 + c J sum_pos hinge + c sum_neg hinge` with `J = |N| / |P|`.
//! A sample is rejected (background) when every score is negative;
//! otherwise the highest score wins, ties going to the lowest class index.

mod smo;

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER: &str = "cope-svm v1";

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    /// Regularization constant `c`.
    pub c: f64,
    /// Relative duality gap at which training stops.
    pub tolerance: f64,
    /// Cap on pair updates.
    pub max_iterations: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_iterations: 1_000_000,
        }
    }
}

impl SvmOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Validation(format!("svm c must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Validation(format!(
                "svm tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation("svm max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// One binary scorer `m(v) = w.v + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub class: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Positive-class cost factor used in training.
    pub cost_factor: f64,
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, v: &[f64]) -> f64 {
        self.weights.iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}

/// Outcome of training one binary scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
}

/// `|N| / |P|`.
pub fn cost_factor(positives: usize, negatives: usize) -> f64 {
    negatives as f64 / positives as f64
}

fn check_dims(sets: &[&[Vec<f64>]]) -> Result<usize> {
    let dim = sets
        .iter()
        .flat_map(|s| s.first())
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    for v in sets.iter().flat_map(|s| s.iter()) {
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("feature vector contains a non-finite value".into()));
        }
    }
    Ok(dim)
}

/// Trains with explicit positive/negative costs `c_pos`, `c_neg`.
pub fn train_weighted(
    pos: &[Vec<f64>],
    neg: &[Vec<f64>],
    c_pos: f64,
    c_neg: f64,
    opts: &SvmOptions,
) -> Result<(LinearSvmModel, TrainReport)> {
    opts.validate()?;
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Training(format!(
            "binary training needs both classes ({} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    let dim = check_dims(&[pos, neg])?;
    let x: Vec<&[f64]> = pos.iter().chain(neg).map(Vec::as_slice).collect();
    let y: Vec<f64> = pos.iter().map(|_| 1.0).chain(neg.iter().map(|_| -1.0)).collect();
    let cost: Vec<f64> = pos.iter().map(|_| c_pos).chain(neg.iter().map(|_| c_neg)).collect();
    let sol = smo::solve(
        &smo::Problem {
            x: &x,
            y: &y,
            cost: &cost,
            dim,
        },
        opts.tolerance,
        opts.max_iterations,
    );
    if !sol.converged {
        log::warn!(
            "svm stopped at the iteration cap ({}) before reaching the duality-gap tolerance",
            sol.iterations
        );
    }
    Ok((
        LinearSvmModel {
            class: 0,
            weights: sol.weights,
            bias: sol.bias,
            cost_factor: c_pos / c_neg,
        },
        TrainReport {
            iterations: sol.iterations,
            converged: sol.converged,
        },
    ))
}

/// Trains one scorer with `J = |N| / |P|` on the positive hinge terms.
pub fn train_binary(pos: &[Vec<f64>], neg: &[Vec<f64>], opts: &SvmOptions) -> Result<LinearSvmModel> {
    let j = cost_factor(pos.len(), neg.len());
    Ok(train_weighted(pos, neg, opts.c * j, opts.c, opts)?.0)
}

/// `1/2 |w|^2 + c J sum_pos hinge + c sum_neg hinge`.
pub fn objective(model: &LinearSvmModel, pos: &[Vec<f64>], neg: &[Vec<f64>], c: f64, j: f64) -> f64 {
    let hinge = |v: &Vec<f64>, y: f64| (1.0 - y * model.score(v)).max(0.0);
    0.5 * model.weights.iter().map(|w| w * w).sum::<f64>()
        + c * j * pos.iter().map(|v| hinge(v, 1.0)).sum::<f64>()
        + c * neg.iter().map(|v| hinge(v, -1.0)).sum::<f64>()
}

/// Class decision for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    Class(usize),
}

impl Decision {
    pub fn class(self) -> Option<usize> {
        match self {
            Decision::Reject => None,
            Decision::Class(c) => Some(c),
        }
    }
}

/// Reject iff every score is negative, else the first maximal score.
pub fn decide_scores(scores: &[f64]) -> Decision {
    decide_with_threshold(scores, 0.0)
}

/// Reject iff every score is below `theta`, else the first maximal score.
pub fn decide_with_threshold(scores: &[f64], theta: f64) -> Decision {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, s)) if s >= theta => Decision::Class(i),
        _ => Decision::Reject,
    }
}

/// `M` one-vs-all scorers over a shared feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassModel {
    classes: Vec<String>,
    models: Vec<LinearSvmModel>,
    c: f64,
}

impl MultiClassModel {
    pub fn new(classes: Vec<String>, models: Vec<LinearSvmModel>, c: f64) -> Result<Self> {
        if models.is_empty() || models.len() != classes.len() {
            return Err(Error::Validation(format!(
                "{} classes but {} models",
                classes.len(),
                models.len()
            )));
        }
        let dim = models[0].dim();
        for (k, m) in models.iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: m.dim(),
                });
            }
            if m.class != k {
                return Err(Error::Validation(format!("model {k} is tagged with class {}", m.class)));
            }
            if !m.bias.is_finite() || m.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Validation(format!("model {k} has non-finite parameters")));
            }
        }
        for c in &classes {
            if c.is_empty() || c.contains(['\n', '\r', ',']) {
                return Err(Error::Validation(format!("invalid class label {c:?}")));
            }
        }
        Ok(Self { classes, models, c })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn models(&self) -> &[LinearSvmModel] {
        &self.models
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn scores(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(self.models.iter().map(|m| m.score(v)).collect())
    }

    pub fn decide(&self, v: &[f64]) -> Result<Decision> {
        Ok(decide_scores(&self.scores(v)?))
    }

    /// Text form:
    ///
    /// ```text
    /// cope-svm v1
    /// c <c>
    /// dimension <K>
    /// classes <M>
    /// class <J> <bias> <label>
    /// <w_1>,...,<w_K>
    /// ...
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        writeln!(w, "c {}", self.c)?;
        writeln!(w, "dimension {}", self.dim())?;
        writeln!(w, "classes {}", self.classes.len())?;
        for (label, m) in self.classes.iter().zip(&self.models) {
            writeln!(w, "class {} {} {}", m.cost_factor, m.bias, label)?;
            let ws: Vec<String> = m.weights.iter().map(f64::to_string).collect();
            writeln!(w, "{}", ws.join(","))?;
        }
        Ok(())
    }

    pub fn parse_text<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Format(format!("model file ends before {what}"))),
            }
        };
        let keyed = |n: usize, line: &str, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|r| r.trim().to_string())
                .ok_or_else(|| Error::parse(n, format!("expected `{key} <value>`")))
        };
        let (n, l) = next("header")?;
        if l.trim() != HEADER {
            return Err(Error::parse(n, format!("expected `{HEADER}`")));
        }
        let (n, l) = next("c")?;
        let c: f64 = keyed(n, &l, "c")?.parse().map_err(|_| Error::parse(n, "bad c"))?;
        let (n, l) = next("dimension")?;
        let dim: usize = keyed(n, &l, "dimension")?
            .parse()
            .map_err(|_| Error::parse(n, "bad dimension"))?;
        let (n, l) = next("classes")?;
        let m: usize = keyed(n, &l, "classes")?
            .parse()
            .map_err(|_| Error::parse(n, "bad class count"))?;
        let mut classes = Vec::with_capacity(m);
        let mut models = Vec::with_capacity(m);
        for k in 0..m {
            let (n, l) = next("class line")?;
            let rest = keyed(n, &l, "class")?;
            let mut parts = rest.splitn(3, ' ');
            let (Some(j), Some(b), Some(label)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(n, "expected `class <J> <bias> <label>`"));
            };
            let cost_factor: f64 = j.parse().map_err(|_| Error::parse(n, "bad J"))?;
            let bias: f64 = b.parse().map_err(|_| Error::parse(n, "bad bias"))?;
            let (n, l) = next("weights")?;
            let weights: Vec<f64> = if dim == 0 && l.trim().is_empty() {
                Vec::new()
            } else {
                l.trim()
                    .split(',')
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(n, "bad weight"))?
            };
            if weights.len() != dim {
                return Err(Error::parse(n, format!("expected {dim} weights, got {}", weights.len())));
            }
            classes.push(label.to_string());
            models.push(LinearSvmModel {
                class: k,
                weights,
                bias,
                cost_factor,
            });
        }
        Self::new(classes, models, c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_text(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Trains one scorer per class. `labels[i]` is the class index of
/// `features[i]`, or `None` for background samples, which are negatives for
/// every scorer.
pub fn train_ova(
    features: &[Vec<f64>],
    labels: &[Option<usize>],
    classes: &[String],
    opts: &SvmOptions,
) -> Result<MultiClassModel> {
    opts.validate()?;
    if features.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::Training("no classes to train".into()));
    }
    check_dims(&[features])?;
    for (i, l) in labels.iter().enumerate() {
        if let Some(k) = l {
            if *k >= classes.len() {
                return Err(Error::Validation(format!("sample {i} has class index {k} out of range")));
            }
        }
    }
    for (k, name) in classes.iter().enumerate() {
        if !labels.contains(&Some(k)) {
            return Err(Error::Training(format!("class `{name}` has no training samples")));
        }
    }
    let models = (0..classes.len())
        .into_par_iter()
        .map(|k| {
            let (pos, neg): (Vec<_>, Vec<_>) = features
                .iter()
                .zip(labels)
                .partition(|(_, l)| **l == Some(k));
            let pos: Vec<Vec<f64>> = pos.into_iter().map(|(v, _)| v.clone()).collect();
            let neg: Vec<Vec<f64>> = neg.into_iter().map(|(v, _)| v.clone()).collect();
            if neg.is_empty() {
                // Single class without background: nothing to separate from.
                let dim = pos[0].len();
                return Ok(LinearSvmModel {
                    class: k,
                    weights: vec![0.0; dim],
                    bias: 1.0,
                    cost_factor: 0.0,
                });
            }
            let mut m = train_binary(&pos, &neg, opts)?;
            m.class = k;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiClassModel::new(classes.to_vec(), models, opts.c)
}

#[cfg(test)]
mod tests;
