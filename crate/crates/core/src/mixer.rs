//! Superimposes event clips on backgrounds at a prescribed SNR.
//!
//! The event gain is `alpha = sqrt(10^(snr/10) E_bg / E_ev)`, with `E` the
//! mean squared amplitude over the event's span in the background. Mixtures
//! that leave `[-1, 1]` are hard-clipped and reported.

use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audio::{read_wav, write_wav, AudioClip, GroundTruth, TruthEntry, WavEncoding};
use crate::error::{Error, Result};

/// Mean squared amplitude.
pub fn mean_energy(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// `sqrt(10^(snr_db/10) e_bg / e_ev)`.
pub fn snr_gain(snr_db: f64, e_bg: f64, e_ev: f64) -> f64 {
    (10f64.powf(snr_db / 10.0) * e_bg / e_ev).sqrt()
}

/// Estimates the SNR of a mixed segment against the aligned original
/// background: `10 log10((E_mix - E_bg) / E_bg)`. Exact only when event and
/// background are uncorrelated over the segment.
pub fn measure_snr(mixed: &[f64], background: &[f64]) -> Result<f64> {
    if mixed.len() != background.len() || mixed.is_empty() {
        return Err(Error::Measurement(format!(
            "segments of {} and {} samples are not aligned",
            mixed.len(),
            background.len()
        )));
    }
    let e_bg = mean_energy(background);
    let e_ev = mean_energy(mixed) - e_bg;
    if !(e_bg > 0.0) || !(e_ev > 0.0) {
        return Err(Error::Measurement(format!(
            "non-positive energy (event {e_ev}, background {e_bg})"
        )));
    }
    Ok(10.0 * (e_ev / e_bg).log10())
}

/// A mixed clip and what went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixOutcome {
    pub clip: AudioClip,
    pub truth: Vec<TruthEntry>,
    pub gains: Vec<f64>,
    /// Samples hard-clipped to `[-1, 1]`.
    pub clipped_samples: usize,
}

/// One event to place on a background.
#[derive(Debug, Clone, Copy)]
pub struct EventSpec<'a> {
    pub clip: &'a AudioClip,
    /// Insertion time; `None` draws one uniformly from `seed`.
    pub t0_s: Option<f64>,
    pub snr_db: f64,
    pub label: &'a str,
    pub seed: u64,
}

fn place(
    bg: &AudioClip,
    ev: &AudioClip,
    t0_s: Option<f64>,
    seed: u64,
    taken: &[(usize, usize)],
) -> Result<usize> {
    if ev.len() > bg.len() {
        return Err(Error::Mix(format!(
            "event of {:.3} s longer than background of {:.3} s",
            ev.duration_s(),
            bg.duration_s()
        )));
    }
    let free = |s: usize| taken.iter().all(|&(a, b)| s + ev.len() <= a || s >= b);
    let latest = bg.len() - ev.len();
    match t0_s {
        Some(t0) => {
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(Error::Mix(format!("insertion time {t0} s is invalid")));
            }
            let start = (t0 * bg.sample_rate() as f64).round() as usize;
            if start > latest {
                return Err(Error::Mix(format!(
                    "event at {t0} s ({:.3} s long) ends after the {:.3} s background",
                    ev.duration_s(),
                    bg.duration_s()
                )));
            }
            if !free(start) {
                return Err(Error::Mix(format!("event at {t0} s overlaps another event")));
            }
            Ok(start)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let start = rng.random_range(0..=latest);
                if free(start) {
                    return Ok(start);
                }
            }
            Err(Error::Mix("no free insertion time for event".into()))
        }
    }
}

/// Places every event on `bg` (in the given order) at its target SNR.
/// Energies always refer to the original background, and events may not
/// overlap.
pub fn mix_events(bg: &AudioClip, events: &[EventSpec]) -> Result<MixOutcome> {
    let rate = bg.sample_rate();
    let mut out = bg.samples().to_vec();
    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut truth = Vec::new();
    let mut gains = Vec::new();
    for e in events {
        if e.clip.sample_rate() != rate {
            return Err(Error::RateMismatch {
                expected: rate,
                found: e.clip.sample_rate(),
            });
        }
        let start = place(bg, e.clip, e.t0_s, e.seed, &taken)?;
        let end = start + e.clip.len();
        let e_ev = mean_energy(e.clip.samples());
        if !(e_ev > 0.0) {
            return Err(Error::Mix(format!("event `{}` has zero energy", e.label)));
        }
        let e_bg = mean_energy(&bg.samples()[start..end]);
        if !(e_bg > 0.0) {
            return Err(Error::Mix(format!(
                "background is silent under event `{}`; SNR undefined",
                e.label
            )));
        }
        let alpha = snr_gain(e.snr_db, e_bg, e_ev);
        for (o, x) in out[start..end].iter_mut().zip(e.clip.samples()) {
            *o += alpha * x;
        }
        taken.push((start, end));
        gains.push(alpha);
        truth.push(TruthEntry {
            label: e.label.to_string(),
            start_s: start as f64 / rate as f64,
            end_s: end as f64 / rate as f64,
        });
    }
    let mut clipped_samples = 0;
    for o in out.iter_mut() {
        if o.abs() > 1.0 {
            *o = o.clamp(-1.0, 1.0);
            clipped_samples += 1;
        }
    }
    if clipped_samples > 0 {
        log::warn!("peak limiter clipped {clipped_samples} samples; realized SNR deviates from target");
    }
    Ok(MixOutcome {
        clip: AudioClip::new(out, rate)?,
        truth,
        gains,
        clipped_samples,
    })
}

/// Single-event form of [`mix_events`] with an explicit insertion time.
pub fn mix_at_snr(bg: &AudioClip, ev: &AudioClip, t0_s: f64, snr_db: f64, label: &str) -> Result<MixOutcome> {
    mix_events(
        bg,
        &[EventSpec {
            clip: ev,
            t0_s: Some(t0_s),
            snr_db,
            label,
            seed: 0,
        }],
    )
}

/// One row of a mix plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedEvent {
    pub event: PathBuf,
    pub t0_s: Option<f64>,
    pub snr_db: f64,
    pub label: String,
    pub seed: u64,
}

/// Events for one output stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStream {
    pub background: PathBuf,
    pub events: Vec<PlannedEvent>,
}

/// Parsed mix plan: consecutive rows sharing a background form one stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixPlan {
    pub streams: Vec<PlannedStream>,
}

impl MixPlan {
    /// Parses CSV `background,event,t0_s,snr_db,label,seed`. An empty `t0_s`
    /// requests a seeded random insertion time. Relative paths resolve
    /// against `base`.
    pub fn parse<R: Read>(source: R, base: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(source);
        let expected = ["background", "event", "t0_s", "snr_db", "label", "seed"];
        let header = rd.headers()?.clone();
        if header.iter().map(str::trim).ne(expected) {
            return Err(Error::parse(1, format!("expected header `{}`", expected.join(","))));
        }
        let mut plan = MixPlan::default();
        for (i, row) in rd.records().enumerate() {
            let line = i + 2;
            let row = row?;
            if row.len() != expected.len() {
                return Err(Error::parse(line, "wrong number of fields"));
            }
            let field = |k: usize| row[k].trim();
            let num = |k: usize| -> Result<f64> {
                field(k)
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad {} `{}`", expected[k], field(k))))
            };
            let t0_s = if field(2).is_empty() { None } else { Some(num(2)?) };
            let label = field(4).to_string();
            if label.is_empty() {
                return Err(Error::parse(line, "empty label"));
            }
            let seed = field(5)
                .parse()
                .map_err(|_| Error::parse(line, format!("bad seed `{}`", field(5))))?;
            let background = base.join(field(0));
            let event = PlannedEvent {
                event: base.join(field(1)),
                t0_s,
                snr_db: num(3)?,
                label,
                seed,
            };
            match plan.streams.last_mut() {
                Some(s) if s.background == background => s.events.push(event),
                _ => plan.streams.push(PlannedStream {
                    background,
                    events: vec![event],
                }),
            }
        }
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(std::fs::File::open(path)?, base)
    }
}

/// Files written for one planned stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedFiles {
    pub wav: PathBuf,
    pub truth: PathBuf,
    pub clipped_samples: usize,
}

/// Executes every stream of `plan`, writing `mix_<k>.wav` and
/// `mix_<k>.csv` (ground truth) into `out_dir`.
pub fn execute_plan(plan: &MixPlan, out_dir: &Path) -> Result<Vec<MixedFiles>> {
    std::fs::create_dir_all(out_dir)?;
    plan.streams
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let bg = read_wav(&s.background)?;
            let clips = s
                .events
                .iter()
                .map(|e| read_wav(&e.event))
                .collect::<Result<Vec<_>>>()?;
            let specs: Vec<EventSpec> = s
                .events
                .iter()
                .zip(&clips)
                .map(|(e, clip)| EventSpec {
                    clip,
                    t0_s: e.t0_s,
                    snr_db: e.snr_db,
                    label: &e.label,
                    seed: e.seed,
                })
                .collect();
            let mixed = mix_events(&bg, &specs)?;
            let wav = out_dir.join(format!("mix_{k:03}.wav"));
            let truth = out_dir.join(format!("mix_{k:03}.csv"));
            write_wav(&wav, &mixed.clip, WavEncoding::Float32)?;
            GroundTruth::new(mixed.truth)?.write_csv(std::fs::File::create(&truth)?)?;
            Ok(MixedFiles {
                wav,
                truth,
                clipped_samples: mixed.clipped_samples,
            })
        })
        .collect()
}
