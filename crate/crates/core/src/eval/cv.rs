use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::error::{Error, Result};

/// Nadeau-Bengio corrected variance `(1/k + n_test/n_train) s^2`, with `s^2`
/// the unbiased sample variance of the `k` per-fold values.
pub fn nb_variance(values: &[f64], n_test: f64, n_train: f64) -> Result<f64> {
    let k = values.len();
    if k < 2 {
        return Err(Error::Validation(format!("need at least two fold values, got {k}")));
    }
    if !(n_train > 0.0 && n_test >= 0.0) {
        return Err(Error::Validation(format!("bad sizes: n_test {n_test}, n_train {n_train}")));
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let s2 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    Ok((1.0 / k as f64 + n_test / n_train) * s2)
}

/// Outcome of one held-out fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub report: MetricsReport,
    pub n_train: usize,
    pub n_test: usize,
}

/// Means and Nadeau-Bengio standard deviations across folds. A statistic is
/// `None` when fewer than two folds define it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: Vec<FoldResult>,
    pub mean_er: Option<f64>,
    pub sd_er: Option<f64>,
    pub mean_fpr: Option<f64>,
    pub sd_fpr: Option<f64>,
}

impl CvSummary {
    pub fn from_folds(folds: Vec<FoldResult>) -> Result<Self> {
        let k = folds.len() as f64;
        let n_test = folds.iter().map(|f| f.n_test as f64).sum::<f64>() / k;
        let n_train = folds.iter().map(|f| f.n_train as f64).sum::<f64>() / k;
        let stat = |get: fn(&MetricsReport) -> Option<f64>| -> Result<(Option<f64>, Option<f64>)> {
            let v: Vec<f64> = folds.iter().filter_map(|f| get(&f.report)).collect();
            if v.len() < 2 {
                return Ok((None, None));
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            Ok((Some(mean), Some(nb_variance(&v, n_test, n_train)?.sqrt())))
        };
        let (mean_er, sd_er) = stat(|r| r.er)?;
        let (mean_fpr, sd_fpr) = stat(|r| r.fpr)?;
        Ok(Self {
            folds,
            mean_er,
            sd_er,
            mean_fpr,
            sd_fpr,
        })
    }
}

/// Runs `run_fold(i)` for each held-out fold `i in 0..k` (in parallel,
/// collected in fold order) and summarizes the results.
pub fn cross_validate<F>(k: usize, run_fold: F) -> Result<CvSummary>
where
    F: Fn(usize) -> Result<FoldResult> + Sync + Send,
{
    if k < 2 {
        return Err(Error::Validation(format!("cross-validation needs k >= 2, got {k}")));
    }
    let folds = (0..k).into_par_iter().map(run_fold).collect::<Result<Vec<_>>>()?;
    CvSummary::from_folds(folds)
}
