//! Trainable peak-constellation feature extractors.
//!
//! An extractor is configured on one prototype: its energy peaks inside a
//! support window around the strongest peak, with energy at least `t1` times
//! that peak, are stored as `(dt, channel, energy)` tuples relative to the
//! reference frame. Applied to another constellation, each tuple looks for a
//! peak near `(t + dt, channel)` and scores it by its energy weighted with an
//! isotropic Gaussian of the displacement (`sigma' = sigma0 / 2`, searched out
//! to `ceil(3 sigma')` cells). The response at frame `t` is the geometric mean
//! of the tuple scores, so it vanishes whenever any expected peak is missing.

mod bank;

pub use bank::CopeBank;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gammatone::{FrontEnd, Gammatonegram};
use crate::peaks::{extract_peaks, reference_point, PeakConstellation};

/// Configuration and tolerance parameters shared by the extractors of a bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopeParams {
    /// Positional tolerance in frames/channels; the Gaussian uses `sigma0 / 2`.
    pub sigma0: f64,
    /// Minimum tuple energy as a fraction of the reference peak.
    pub t1: f64,
    /// Width of the configuration window around the reference peak, ms.
    pub support_ms: f64,
}

impl Default for CopeParams {
    fn default() -> Self {
        Self {
            sigma0: 5.0,
            t1: 0.25,
            support_ms: 200.0,
        }
    }
}

impl CopeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Validation(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if !(0.0..1.0).contains(&self.t1) {
            return Err(Error::Validation(format!("t1 must lie in [0, 1), got {}", self.t1)));
        }
        if !(self.support_ms > 0.0 && self.support_ms.is_finite()) {
            return Err(Error::Validation(format!(
                "support_ms must be positive, got {}",
                self.support_ms
            )));
        }
        Ok(())
    }

    /// Largest admissible `|dt|`: half the support, rounded up to frames.
    pub fn half_width_frames(&self, frontend: &FrontEnd) -> usize {
        let hop_ms = 1000.0 * frontend.hop_s();
        ((self.support_ms / 2.0) / hop_ms - 1e-9).ceil().max(0.0) as usize
    }

    /// Search radius in cells, `ceil(3 sigma0 / 2)`.
    pub fn radius(&self) -> usize {
        (1.5 * self.sigma0 - 1e-12).ceil() as usize
    }
}

/// One model peak relative to the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuple {
    pub dt: i64,
    pub channel: usize,
    pub energy: f64,
}

/// A configured extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct CopeExtractor {
    tuples: Vec<Tuple>,
    params: CopeParams,
    label: String,
    frontend: FrontEnd,
}

impl CopeExtractor {
    /// Assembles an extractor from stored parts, checking every invariant a
    /// configured extractor satisfies.
    pub fn new(
        tuples: Vec<Tuple>,
        params: CopeParams,
        label: impl Into<String>,
        frontend: FrontEnd,
    ) -> Result<Self> {
        params.validate()?;
        let label = label.into();
        if label.is_empty() || label.contains(['\n', '\r']) {
            return Err(Error::Validation("extractor label must be a non-empty single line".into()));
        }
        if tuples.is_empty() {
            return Err(Error::Validation("extractor has no tuples".into()));
        }
        let max_e = tuples.iter().map(|t| t.energy).fold(0.0, f64::max);
        let half = params.half_width_frames(&frontend) as i64;
        for t in &tuples {
            if !(t.energy > 0.0 && t.energy.is_finite()) {
                return Err(Error::Validation(format!("tuple energy {} not positive", t.energy)));
            }
            if t.channel >= frontend.filterbank.num_channels {
                return Err(Error::Validation(format!("tuple channel {} out of range", t.channel)));
            }
            if t.dt.abs() > half {
                return Err(Error::Validation(format!(
                    "tuple offset {} exceeds support half-width {half}",
                    t.dt
                )));
            }
            if t.energy < params.t1 * max_e {
                return Err(Error::Validation(format!(
                    "tuple energy {} below t1 * {max_e}",
                    t.energy
                )));
            }
        }
        if !tuples.iter().any(|t| t.dt == 0 && t.energy == max_e) {
            return Err(Error::Validation(
                "no reference tuple (dt = 0 with the highest energy)".into(),
            ));
        }
        let mut keys: Vec<(i64, usize)> = tuples.iter().map(|t| (t.dt, t.channel)).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate tuple position".into()));
        }
        Ok(Self {
            tuples,
            params,
            label,
            frontend,
        })
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn params(&self) -> &CopeParams {
        &self.params
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.frontend
    }

    /// Same model with a different tolerance.
    pub fn with_sigma0(&self, sigma0: f64) -> Result<Self> {
        let params = CopeParams { sigma0, ..self.params };
        params.validate()?;
        Ok(Self {
            params,
            ..self.clone()
        })
    }
}

/// Configures an extractor on the Gammatonegram of a prototype.
pub fn configure(
    g: &Gammatonegram,
    params: CopeParams,
    label: impl Into<String>,
) -> Result<CopeExtractor> {
    configure_from_peaks(&extract_peaks(g), params, label)
}

/// Configures an extractor on an already extracted constellation.
pub fn configure_from_peaks(
    c: &PeakConstellation,
    params: CopeParams,
    label: impl Into<String>,
) -> Result<CopeExtractor> {
    params.validate()?;
    let label = label.into();
    let reference = reference_point(c).map_err(|_| {
        Error::Configuration(format!("prototype `{label}` has no energy peaks"))
    })?;
    let half = params.half_width_frames(c.frontend()) as i64;
    let floor = params.t1 * reference.energy;
    let tuples: Vec<Tuple> = c
        .peaks()
        .iter()
        .filter(|p| (p.frame as i64 - reference.frame as i64).abs() <= half && p.energy >= floor)
        .map(|p| Tuple {
            dt: p.frame as i64 - reference.frame as i64,
            channel: p.channel,
            energy: p.energy,
        })
        .collect();
    if tuples.is_empty() {
        return Err(Error::Configuration(format!(
            "no peaks of prototype `{label}` survive the support and t1 filters"
        )));
    }
    CopeExtractor::new(tuples, params, label, *c.frontend())
}

/// Gaussian weight `exp(-(dt^2 + df^2) / (2 sigma'^2))` with `sigma' = sigma0 / 2`.
pub fn gaussian_weight(dt: i64, df: i64, sigma0: f64) -> f64 {
    let s = sigma0 / 2.0;
    (-((dt * dt + df * df) as f64) / (2.0 * s * s)).exp()
}

/// Score of one tuple at frame `t`, evaluated literally: the best
/// Gaussian-weighted peak energy within `ceil(3 sigma')` cells of the expected
/// position `(t + dt, channel)`.
pub fn shifted_peak_response(c: &PeakConstellation, tuple: &Tuple, t: i64, sigma0: f64) -> f64 {
    let radius = (1.5 * sigma0 - 1e-12).ceil() as i64;
    let mut best = 0.0f64;
    for dt in -radius..=radius {
        for df in -radius..=radius {
            let e = c.energy_at(t + tuple.dt + dt, tuple.channel as i64 + df);
            if e > 0.0 {
                best = best.max(e * gaussian_weight(dt, df, sigma0));
            }
        }
    }
    best
}

/// Response of one extractor over every frame of a constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct CopeResponse {
    values: Vec<f64>,
    extractor: usize,
    frontend: FrontEnd,
}

impl CopeResponse {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extractor(&self) -> usize {
        self.extractor
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.frontend
    }

    /// Frame with the largest response (earliest on ties).
    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }
}

/// Tuple scores for every frame, computed by scattering each nearby peak
/// over the frames whose search window contains it.
fn tuple_scores(c: &PeakConstellation, tuple: &Tuple, weights: &[f64], radius: i64) -> Vec<f64> {
    let frames = c.frames() as i64;
    let side = 2 * radius + 1;
    let mut s = vec![0.0f64; c.frames()];
    let lo = (tuple.channel as i64 - radius).max(0);
    let hi = (tuple.channel as i64 + radius).min(c.channels() as i64 - 1);
    for ch in lo..=hi {
        let df = ch - tuple.channel as i64;
        for &(frame, energy) in c.channel_peaks(ch as usize) {
            for dt in -radius..=radius {
                let t = frame as i64 - tuple.dt - dt;
                if t < 0 || t >= frames {
                    continue;
                }
                let v = energy * weights[((dt + radius) * side + df + radius) as usize];
                let slot = &mut s[t as usize];
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
    s
}

/// Geometric-mean response with the output threshold `t2` (values below it
/// are zeroed). [`response`] uses `t2 = 0`.
pub fn response_with_threshold(
    c: &PeakConstellation,
    ex: &CopeExtractor,
    t2: f64,
) -> Result<CopeResponse> {
    ex.frontend.check_compatible(c.frontend())?;
    let sigma0 = ex.params.sigma0;
    let radius = ex.params.radius() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .flat_map(|dt| (-radius..=radius).map(move |df| gaussian_weight(dt, df, sigma0)))
        .collect();
    let mut log_sum = vec![0.0f64; c.frames()];
    let mut alive = vec![true; c.frames()];
    for tuple in &ex.tuples {
        let s = tuple_scores(c, tuple, &weights, radius);
        for ((acc, live), v) in log_sum.iter_mut().zip(alive.iter_mut()).zip(s) {
            if v > 0.0 {
                *acc += v.ln();
            } else {
                *live = false;
            }
        }
    }
    let inv = 1.0 / ex.tuples.len() as f64;
    let values = log_sum
        .into_iter()
        .zip(alive)
        .map(|(acc, live)| {
            let r = if live { (acc * inv).exp() } else { 0.0 };
            if r < t2 {
                0.0
            } else {
                r
            }
        })
        .collect();
    Ok(CopeResponse {
        values,
        extractor: 0,
        frontend: *c.frontend(),
    })
}

/// `r(t) = (prod_i s_i(t))^(1/L)` for every frame of `c`.
pub fn response(c: &PeakConstellation, ex: &CopeExtractor) -> Result<CopeResponse> {
    response_with_threshold(c, ex, 0.0)
}

/// Frames whose start time lies in `[start_s, end_s]`.
pub fn frame_range(
    frontend: &FrontEnd,
    frames: usize,
    start_s: f64,
    end_s: f64,
) -> Result<std::ops::RangeInclusive<usize>> {
    let err = Error::Interval {
        start: start_s,
        end: end_s,
    };
    if !(start_s < end_s) || frames == 0 {
        return Err(err);
    }
    let hop = frontend.hop_s();
    let first = (start_s / hop - 1e-9).ceil().max(0.0) as usize;
    let last_f = (end_s / hop + 1e-9).floor();
    if last_f < 0.0 {
        return Err(err);
    }
    let last = (last_f as usize).min(frames - 1);
    if first > last {
        return Err(err);
    }
    Ok(first..=last)
}

/// Max-pools a response over the frames starting inside `[start_s, end_s]`.
pub fn pooled_value(r: &CopeResponse, start_s: f64, end_s: f64) -> Result<f64> {
    let range = frame_range(&r.frontend, r.values.len(), start_s, end_s)?;
    Ok(r.values[range].iter().copied().fold(0.0, f64::max))
}

/// Pooled responses of a whole bank for one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CopeFeatureVector {
    pub values: Vec<f64>,
    pub interval: (f64, f64),
}

impl CopeFeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Responses of every extractor of `bank`, in bank order.
pub fn bank_responses(c: &PeakConstellation, bank: &CopeBank) -> Result<Vec<CopeResponse>> {
    bank.extractors()
        .par_iter()
        .enumerate()
        .map(|(k, ex)| {
            let mut r = response(c, ex)?;
            r.extractor = k;
            Ok(r)
        })
        .collect()
}

/// Pools precomputed bank responses over one interval.
pub fn pool_vector(responses: &[CopeResponse], start_s: f64, end_s: f64) -> Result<CopeFeatureVector> {
    let values = responses
        .iter()
        .map(|r| pooled_value(r, start_s, end_s))
        .collect::<Result<_>>()?;
    Ok(CopeFeatureVector {
        values,
        interval: (start_s, end_s),
    })
}

/// Feature vector of `c` over `[start_s, end_s]`: one pooled response per
/// extractor, in bank order.
pub fn extract_vector(
    c: &PeakConstellation,
    bank: &CopeBank,
    start_s: f64,
    end_s: f64,
) -> Result<CopeFeatureVector> {
    bank.frontend().check_compatible(c.frontend())?;
    frame_range(c.frontend(), c.frames(), start_s, end_s)?;
    pool_vector(&bank_responses(c, bank)?, start_s, end_s)
}
