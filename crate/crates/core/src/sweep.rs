//! Sensitivity sweeps over one extractor parameter with cross-validated
//! ER/FPR and Nadeau-Bengio deviations.
//!
//! The swept parameters (`sigma0`, `support_ms`, `t1`) never change the
//! front-end, so constellations are computed once and shared by every value.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::peaks::PeakConstellation;
use crate::pipeline::{cross_validate_clips, Analyzer, LabeledClip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Sigma0,
    SupportMs,
    T1,
}

impl SweepParam {
    pub fn apply(self, cfg: &PipelineConfig, value: f64) -> PipelineConfig {
        let mut c = cfg.clone();
        match self {
            SweepParam::Sigma0 => c.cope.sigma0 = value,
            SweepParam::SupportMs => c.cope.support_ms = value,
            SweepParam::T1 => c.cope.t1 = value,
        }
        c
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma0" => Ok(SweepParam::Sigma0),
            "support_ms" => Ok(SweepParam::SupportMs),
            "t1" => Ok(SweepParam::T1),
            other => Err(Error::Validation(format!(
                "unknown sweep parameter `{other}` (expected sigma0, support_ms or t1)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Sigma0 => "sigma0",
            SweepParam::SupportMs => "support_ms",
            SweepParam::T1 => "t1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub base: PipelineConfig,
    pub folds: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Validation("sweep needs at least one value".into()));
        }
        if self.folds < 2 {
            return Err(Error::Validation(format!("sweep needs at least 2 folds, got {}", self.folds)));
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub er: Option<f64>,
    pub sigma_er: Option<f64>,
    pub fpr: Option<f64>,
    pub sigma_fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV `value,ER,sigma_ER,FPR,sigma_FPR`; undefined entries are empty.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["value", "ER", "sigma_ER", "FPR", "sigma_FPR"])?;
        for r in &self.rows {
            w.write_record([r.value.to_string(), cell(r.er), cell(r.sigma_er), cell(r.fpr), cell(r.sigma_fpr)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn labels_names(data: &[LabeledClip]) -> (Vec<Option<String>>, Vec<String>) {
    (
        data.iter().map(|d| d.label.clone()).collect(),
        data.iter().map(|d| d.name.clone()).collect(),
    )
}

/// Sweep over precomputed constellations.
pub fn run_sweep_on(
    consts: &[PeakConstellation],
    labels: &[Option<String>],
    names: &[String],
    folds: &[usize],
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    cfg.validate()?;
    let rows = cfg
        .values
        .par_iter()
        .map(|&value| {
            let c = cfg.parameter.apply(&cfg.base, value);
            let cv = cross_validate_clips(consts, labels, names, folds, &c)?;
            Ok(SweepRow {
                value,
                er: cv.mean_er,
                sigma_er: cv.sd_er,
                fpr: cv.mean_fpr,
                sigma_fpr: cv.sd_fpr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: cfg.parameter,
        rows,
    })
}

/// Analyzes every clip once, then sweeps.
pub fn run_sweep(data: &[LabeledClip], folds: &[usize], cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    check_folds(data, folds, cfg.folds)?;
    let analyzer = Analyzer::from_config(&cfg.base)?;
    let consts = data
        .par_iter()
        .map(|d| analyzer.constellation(&d.clip))
        .collect::<Result<Vec<_>>>()?;
    let (labels, names) = labels_names(data);
    run_sweep_on(&consts, &labels, &names, folds, cfg)
}

/// Reference path that re-analyzes the audio for every value.
pub fn run_sweep_uncached(data: &[LabeledClip], folds: &[usize], cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    check_folds(data, folds, cfg.folds)?;
    let (labels, names) = labels_names(data);
    let mut rows = Vec::with_capacity(cfg.values.len());
    for &value in &cfg.values {
        let c = cfg.parameter.apply(&cfg.base, value);
        let analyzer = Analyzer::from_config(&c)?;
        let consts = data
            .iter()
            .map(|d| analyzer.constellation(&d.clip))
            .collect::<Result<Vec<_>>>()?;
        let one = SweepConfig {
            values: vec![value],
            ..cfg.clone()
        };
        rows.extend(run_sweep_on(&consts, &labels, &names, folds, &one)?.rows);
    }
    Ok(SweepTable {
        parameter: cfg.parameter,
        rows,
    })
}

fn check_folds(data: &[LabeledClip], folds: &[usize], k: usize) -> Result<()> {
    if folds.len() != data.len() {
        return Err(Error::Validation(format!("{} fold ids for {} clips", folds.len(), data.len())));
    }
    if let Some(f) = folds.iter().find(|&&f| f >= k) {
        return Err(Error::Validation(format!("fold id {f} outside 0..{k}")));
    }
    Ok(())
}
