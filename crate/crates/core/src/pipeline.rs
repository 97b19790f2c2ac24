//! End-to-end glue: audio to constellations, prototypes to banks, feature
//! vectors to trained models, and clip-level cross-validation.

use std::borrow::Cow;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audio::{resample, AudioClip};
use crate::classifier::{train_ova, MultiClassModel};
use crate::config::PipelineConfig;
use crate::cope::{configure_from_peaks, extract_vector, CopeBank, CopeExtractor, CopeParams};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, score_clips, CvSummary, FoldResult, MetricsReport};
use crate::gammatone::{design_filterbank, gammatonegram, Filterbank, FrontEnd, Gammatonegram};
use crate::peaks::{extract_peaks, PeakConstellation};

/// Front-end bound to a designed filterbank.
#[derive(Debug, Clone)]
pub struct Analyzer {
    frontend: FrontEnd,
    filterbank: Filterbank,
}

impl Analyzer {
    pub fn new(frontend: FrontEnd) -> Result<Self> {
        frontend.validate()?;
        let filterbank = design_filterbank(&frontend.filterbank)?;
        Ok(Self { frontend, filterbank })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        Self::new(cfg.frontend.frontend()?)
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.frontend
    }

    pub fn filterbank(&self) -> &Filterbank {
        &self.filterbank
    }

    /// The clip at the front-end rate, resampled when needed.
    pub fn prepare<'a>(&self, clip: &'a AudioClip) -> Result<Cow<'a, AudioClip>> {
        let rate = self.frontend.filterbank.sample_rate;
        if clip.sample_rate() == rate {
            Ok(Cow::Borrowed(clip))
        } else {
            log::info!("resampling {} Hz input to {rate} Hz", clip.sample_rate());
            Ok(Cow::Owned(resample(clip, rate)?))
        }
    }

    pub fn gammatonegram(&self, clip: &AudioClip) -> Result<Gammatonegram> {
        let clip = self.prepare(clip)?;
        gammatonegram(&clip, &self.filterbank, self.frontend.frame_size, self.frontend.normalize)
    }

    pub fn constellation(&self, clip: &AudioClip) -> Result<PeakConstellation> {
        Ok(extract_peaks(&self.gammatonegram(clip)?))
    }
}

/// A clip with an optional class label; `None` marks background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub name: String,
    pub clip: AudioClip,
    pub label: Option<String>,
}

/// Sorted distinct class labels.
pub fn class_list<'a>(labels: impl IntoIterator<Item = &'a Option<String>>) -> Vec<String> {
    labels
        .into_iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Indices of the prototypes: per class (in `classes` order), the first
/// `per_class` labeled items in input order, or all of them.
pub fn select_prototypes(labels: &[Option<String>], classes: &[String], per_class: Option<usize>) -> Vec<usize> {
    let mut out = Vec::new();
    for c in classes {
        let idx = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_deref() == Some(c.as_str()))
            .map(|(i, _)| i)
            .take(per_class.unwrap_or(usize::MAX));
        out.extend(idx);
    }
    out
}

/// Configures one extractor per prototype, in order. Fails listing every
/// prototype that yields no usable peaks.
pub fn build_bank(prototypes: &[(&str, &PeakConstellation, &str)], params: CopeParams) -> Result<CopeBank> {
    if prototypes.is_empty() {
        return Err(Error::Configuration("no prototypes given".into()));
    }
    let results: Vec<Result<CopeExtractor>> = prototypes
        .par_iter()
        .map(|(_, c, label)| configure_from_peaks(c, params, *label))
        .collect();
    let failed: Vec<&str> = results
        .iter()
        .zip(prototypes)
        .filter(|(r, _)| r.is_err())
        .map(|(_, (name, _, _))| *name)
        .collect();
    if !failed.is_empty() {
        return Err(Error::Configuration(format!(
            "prototypes without usable energy peaks: {}",
            failed.join(", ")
        )));
    }
    CopeBank::new(results.into_iter().map(|r| r.expect("checked")).collect())
}

/// Feature vector of a whole constellation: pooling over every frame.
pub fn whole_vector(c: &PeakConstellation, bank: &CopeBank) -> Result<Vec<f64>> {
    let end = c.frames().saturating_sub(1) as f64 * c.frontend().hop_s();
    let end = if end > 0.0 { end } else { c.frontend().hop_s() };
    Ok(extract_vector(c, bank, 0.0, end)?.values)
}

/// A configured bank with its classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSystem {
    pub bank: CopeBank,
    pub model: MultiClassModel,
}

impl TrainedSystem {
    pub fn classes(&self) -> &[String] {
        self.model.classes()
    }
}

/// Configures a bank on prototypes drawn from the training items and trains
/// the one-vs-all model on their whole-clip feature vectors. Background
/// items serve as negatives for every class.
pub fn train_system(
    consts: &[PeakConstellation],
    labels: &[Option<String>],
    names: &[String],
    classes: &[String],
    cfg: &PipelineConfig,
) -> Result<TrainedSystem> {
    if consts.len() != labels.len() || consts.len() != names.len() {
        return Err(Error::Validation("constellations, labels and names differ in length".into()));
    }
    for c in classes {
        if !labels.iter().any(|l| l.as_deref() == Some(c.as_str())) {
            return Err(Error::Training(format!("class `{c}` has no training samples")));
        }
    }
    let picks = select_prototypes(labels, classes, cfg.cope.prototypes_per_class);
    let protos: Vec<(&str, &PeakConstellation, &str)> = picks
        .iter()
        .map(|&i| (names[i].as_str(), &consts[i], labels[i].as_deref().expect("labeled")))
        .collect();
    let bank = build_bank(&protos, cfg.cope.params())?;
    let features = consts
        .par_iter()
        .map(|c| whole_vector(c, &bank))
        .collect::<Result<Vec<_>>>()?;
    let idx: Vec<Option<usize>> = labels
        .iter()
        .map(|l| l.as_ref().and_then(|l| classes.iter().position(|c| c == l)))
        .collect();
    let model = train_ova(&features, &idx, classes, &cfg.svm.options())?;
    Ok(TrainedSystem { bank, model })
}

/// Scores held-out items clip by clip.
pub fn evaluate_clips(
    system: &TrainedSystem,
    consts: &[PeakConstellation],
    labels: &[Option<String>],
) -> Result<MetricsReport> {
    let classes = system.classes();
    let mut truth = Vec::with_capacity(labels.len());
    for l in labels {
        truth.push(match l {
            None => None,
            Some(l) => Some(
                classes
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| Error::Validation(format!("test label `{l}` not among trained classes")))?,
            ),
        });
    }
    let decisions = consts
        .par_iter()
        .map(|c| system.model.decide(&whole_vector(c, &system.bank)?))
        .collect::<Result<Vec<_>>>()?;
    score_clips(&truth, &decisions, classes)
}

/// Stratified fold assignment: items of each class (and background) are
/// shuffled with `seed` and dealt round-robin into `k` folds.
pub fn assign_folds(labels: &[Option<String>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut groups: Vec<Option<String>> = labels.to_vec();
    groups.sort();
    groups.dedup();
    for g in groups {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            folds[i] = j % k;
        }
    }
    folds
}

/// Clip-level k-fold cross-validation over precomputed constellations.
/// `folds[i]` is the fold of item `i`; folds are numbered `0..k`.
pub fn cross_validate_clips(
    consts: &[PeakConstellation],
    labels: &[Option<String>],
    names: &[String],
    folds: &[usize],
    cfg: &PipelineConfig,
) -> Result<CvSummary> {
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let classes = class_list(labels);
    cross_validate(k, |f| {
        let split = |test: bool| -> Vec<usize> { (0..consts.len()).filter(|&i| (folds[i] == f) == test).collect() };
        let (train, test) = (split(false), split(true));
        let pick_c = |ix: &[usize]| ix.iter().map(|&i| consts[i].clone()).collect::<Vec<_>>();
        let pick_l = |ix: &[usize]| ix.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>();
        let pick_n = |ix: &[usize]| ix.iter().map(|&i| names[i].clone()).collect::<Vec<_>>();
        let system = train_system(&pick_c(&train), &pick_l(&train), &pick_n(&train), &classes, cfg)
            .map_err(|e| match e {
                Error::Training(m) => Error::Training(format!("fold {f}: {m}")),
                other => other,
            })?;
        let report = evaluate_clips(&system, &pick_c(&test), &pick_l(&test))?;
        Ok(FoldResult {
            report,
            n_train: train.len(),
            n_test: test.len(),
        })
    })
}
