//! Audio clips, WAV I/O, resampling and ground-truth annotations.
//!
//! Everything downstream works on mono `f64` samples in `[-1, 1]`. Stereo
//! input is averaged to mono; integer PCM is scaled by `2^(bits-1)` so that
//! 16-bit `-32768` maps to exactly `-1.0`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable mono audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting empty, non-finite or out-of-range input.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Validation("audio clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        if let Some(i) = samples.iter().position(|s| s.abs() > 1.0) {
            return Err(Error::Validation(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a clip from arbitrary finite samples, dividing by the peak
    /// magnitude when it exceeds 1.
    pub fn from_unnormalized(mut samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let peak = samples
            .iter()
            .filter(|s| s.is_finite())
            .fold(0.0f64, |m, s| m.max(s.abs()));
        if peak > 1.0 {
            samples.iter_mut().for_each(|s| *s /= peak);
        }
        Self::new(samples, sample_rate)
    }

    /// `n` zero samples.
    pub fn silence(n: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; n], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`; fails if the result leaves `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }

    /// Copies samples `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(Error::Validation(format!(
                "slice [{start}, {end}) outside clip of {} samples",
                self.samples.len()
            )));
        }
        Self::new(self.samples[start..end].to_vec(), self.sample_rate)
    }
}

/// Encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(m) => Error::Format(m.to_string()),
        hound::Error::Unsupported => Error::Unsupported("unsupported WAV sample format".into()),
        other => Error::Format(other.to_string()),
    }
}

/// Reads a PCM integer or IEEE float WAV file with one or two channels.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound)?;
    decode_wav(reader)
}

/// Like [`read_wav`] but from any byte source.
pub fn read_wav_from<R: Read>(source: R) -> Result<AudioClip> {
    let reader = hound::WavReader::new(source).map_err(map_hound)?;
    decode_wav(reader)
}

fn decode_wav<R: Read>(reader: hound::WavReader<R>) -> Result<AudioClip> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(Error::Unsupported(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if spec.bits_per_sample == 0 || spec.bits_per_sample > 32 {
                return Err(Error::Unsupported(format!(
                    "{}-bit integer PCM",
                    spec.bits_per_sample
                )));
            }
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::Unsupported(format!(
                    "{}-bit float",
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
    };
    if interleaved.is_empty() {
        return Err(Error::Format("WAV file contains no samples".into()));
    }
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(Error::Format("WAV file contains non-finite samples".into()));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|frame| 0.5 * (frame[0] + frame[1]))
            .collect()
    };
    AudioClip::from_unnormalized(mono, spec.sample_rate)
}

/// Writes a mono WAV file. PCM samples are rounded to the nearest step of
/// `1/32768` and saturated to the 16-bit range.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, encoding: WavEncoding) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_wav_to(file, clip, encoding)
}

pub fn write_wav_to<W: Write + std::io::Seek>(
    sink: W,
    clip: &AudioClip,
    encoding: WavEncoding,
) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::new(sink, spec).map_err(map_hound)?;
    for &s in &clip.samples {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(v).map_err(map_hound)?;
            }
            WavEncoding::Float32 => writer.write_sample(s as f32).map_err(map_hound)?,
        }
    }
    writer.finalize().map_err(map_hound)
}

/// Linear-interpolation resampler.
///
/// The output has `round(N * target / source)` samples (at least one); output
/// sample `k` reads the input at fractional position `k * source / target`,
/// holding the last sample past the end.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::Validation("target sample rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = clip.samples();
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_len = ((src.len() as f64 / ratio).round() as usize).max(1);
    let last = src.len() - 1;
    let out = (0..out_len)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= last {
                return src[last];
            }
            let frac = pos - i as f64;
            src[i] + frac * (src[i + 1] - src[i])
        })
        .collect();
    AudioClip::new(out, target_rate)
}

/// One annotated event occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthEntry {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// Validated, start-sorted, non-overlapping event annotations for one stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    entries: Vec<TruthEntry>,
}

impl GroundTruth {
    pub fn new(mut entries: Vec<TruthEntry>) -> Result<Self> {
        let mut problems = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            if !(e.start_s.is_finite() && e.end_s.is_finite()) || e.start_s >= e.end_s {
                problems.push(format!(
                    "entry {}: inverted or empty interval {}..{}",
                    i + 1,
                    e.start_s,
                    e.end_s
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems.join("; ")));
        }
        entries.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        let truth = Self { entries };
        truth.check_overlaps(|i| format!("entry {}", i + 1))?;
        Ok(truth)
    }

    fn check_overlaps(&self, name: impl Fn(usize) -> String) -> Result<()> {
        let problems: Vec<String> = self
            .entries
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].start_s < w[0].end_s)
            .map(|(i, w)| {
                format!(
                    "{} ({}..{}) overlaps {} ({}..{})",
                    name(i),
                    w[0].start_s,
                    w[0].end_s,
                    name(i + 1),
                    w[1].start_s,
                    w[1].end_s
                )
            })
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    pub fn entries(&self) -> &[TruthEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails if any label is missing from `classes`.
    pub fn check_labels(&self, classes: &[String]) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .iter()
            .filter(|e| !classes.contains(&e.label))
            .map(|e| e.label.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "labels not in class set: {}",
                unknown.join(", ")
            )))
        }
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["label", "start_s", "end_s"])?;
        for e in &self.entries {
            w.write_record([e.label.clone(), e.start_s.to_string(), e.end_s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses `label,start_s,end_s` CSV text (with header).
pub fn parse_ground_truth<R: Read>(source: R) -> Result<GroundTruth> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["label", "start_s", "end_s"] {
        return Err(Error::parse(1, "expected header `label,start_s,end_s`"));
    }
    let mut parsed = Vec::new();
    let mut problems = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::parse(line, "expected 3 fields"));
        }
        let num = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::parse(line, format!("field {}: {e}", i + 1)))
        };
        let entry = TruthEntry {
            label: record[0].to_string(),
            start_s: num(1)?,
            end_s: num(2)?,
        };
        if !(entry.start_s < entry.end_s) {
            problems.push(format!(
                "line {line}: inverted interval {}..{}",
                entry.start_s, entry.end_s
            ));
        }
        parsed.push((line, entry));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems.join("; ")));
    }
    parsed.sort_by(|a, b| a.1.start_s.total_cmp(&b.1.start_s));
    let lines: Vec<usize> = parsed.iter().map(|(l, _)| *l).collect();
    let truth = GroundTruth {
        entries: parsed.into_iter().map(|(_, e)| e).collect(),
    };
    truth.check_overlaps(|i| format!("line {}", lines[i]))?;
    Ok(truth)
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    parse_ground_truth(std::fs::File::open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn wav_bytes(spec: hound::WavSpec, write: impl FnOnce(&mut hound::WavWriter<&mut Cursor<Vec<u8>>>)) -> Vec<u8> {
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            write(&mut w);
            w.finalize().unwrap();
        }
        cursor.into_inner()
    }

    fn pcm16(channels: u16) -> hound::WavSpec {
        hound::WavSpec {
            channels,
            sample_rate: 32000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        }
    }

    #[test]
    fn one_second_of_silence() {
        let bytes = wav_bytes(pcm16(1), |w| {
            for _ in 0..32000 {
                w.write_sample(0i16).unwrap();
            }
        });
        let clip = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(clip.len(), 32000);
        assert_eq!(clip.sample_rate(), 32000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
        assert_eq!(clip.duration_s(), 1.0);
    }

    #[test]
    fn most_negative_pcm_maps_to_minus_one() {
        let bytes = wav_bytes(pcm16(1), |w| {
            w.write_sample(-32768i16).unwrap();
            w.write_sample(16384i16).unwrap();
        });
        let clip = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 0.5]);
    }

    #[test]
    fn stereo_is_averaged() {
        let bytes = wav_bytes(pcm16(2), |w| {
            for _ in 0..4 {
                w.write_sample(16384i16).unwrap();
                w.write_sample(-16384i16).unwrap();
            }
        });
        let clip = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(clip.samples(), &[0.0; 4]);
    }

    #[test]
    fn float_wav_is_read() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let bytes = wav_bytes(spec, |w| {
            w.write_sample(0.25f32).unwrap();
            w.write_sample(-0.5f32).unwrap();
        });
        let clip = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(clip.samples(), &[0.25, -0.5]);
        assert_eq!(clip.sample_rate(), 16000);
    }

    #[test]
    fn garbage_is_a_format_error() {
        let err = read_wav_from(Cursor::new(b"RIFFnot really a wav".to_vec())).unwrap_err();
        assert!(matches!(err, Error::Format(_) | Error::Io(_)), "{err:?}");
        let err = read_wav_from(Cursor::new(b"hello world, definitely no riff".to_vec())).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err:?}");
    }

    #[test]
    fn more_than_two_channels_unsupported() {
        let bytes = wav_bytes(pcm16(3), |w| {
            for _ in 0..3 {
                w.write_sample(0i16).unwrap();
            }
        });
        assert!(matches!(
            read_wav_from(Cursor::new(bytes)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn clip_rejects_bad_samples() {
        assert!(AudioClip::new(vec![], 8000).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 8000).is_err());
        assert!(AudioClip::new(vec![1.5], 8000).is_err());
        assert!(AudioClip::new(vec![0.1], 0).is_err());
        let c = AudioClip::from_unnormalized(vec![2.0, -1.0], 8000).unwrap();
        assert_eq!(c.samples(), &[1.0, -0.5]);
    }

    #[test]
    fn resample_same_rate_is_identity() {
        let clip = AudioClip::new(vec![0.1, -0.2, 0.3], 32000).unwrap();
        assert_eq!(resample(&clip, 32000).unwrap(), clip);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let clip = AudioClip::new(vec![0.7; 4410], 44100).unwrap();
        for rate in [8000, 32000, 48000, 96000] {
            let out = resample(&clip, rate).unwrap();
            assert!(out.samples().iter().all(|&s| (s - 0.7).abs() < 1e-15));
            assert!((out.duration_s() - clip.duration_s()).abs() <= 1.0 / rate as f64);
        }
    }

    #[test]
    fn resample_keeps_tone_frequency() {
        use rustfft::{num_complex::Complex, FftPlanner};
        let n = 48000;
        let tone: Vec<f64> = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 48000.0).sin())
            .collect();
        let out = resample(&AudioClip::new(tone, 48000).unwrap(), 32000).unwrap();
        let len = out.len();
        let mut buf: Vec<Complex<f64>> = out.samples().iter().map(|&s| Complex::new(s, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let peak = (0..len / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        let bin_hz = 32000.0 / len as f64;
        assert!((peak as f64 * bin_hz - 1000.0).abs() <= bin_hz, "peak bin {peak}");
    }

    #[test]
    fn ground_truth_single_entry() {
        let gt = parse_ground_truth("label,start_s,end_s\nscream,1.0,2.5\n".as_bytes()).unwrap();
        assert_eq!(
            gt.entries(),
            &[TruthEntry {
                label: "scream".into(),
                start_s: 1.0,
                end_s: 2.5
            }]
        );
    }

    #[test]
    fn ground_truth_empty_body() {
        let gt = parse_ground_truth("label,start_s,end_s\n".as_bytes()).unwrap();
        assert!(gt.is_empty());
    }

    #[test]
    fn ground_truth_inverted_interval() {
        let err = parse_ground_truth("label,start_s,end_s\nx,3.0,2.0\n".as_bytes()).unwrap_err();
        match err {
            Error::Validation(m) => assert!(m.contains("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ground_truth_sorted_and_overlap_reported() {
        let gt = parse_ground_truth("label,start_s,end_s\nb,5,6\na,1,2\n".as_bytes()).unwrap();
        assert_eq!(gt.entries()[0].label, "a");
        let err = parse_ground_truth("label,start_s,end_s\na,1,3\nb,2,4\n".as_bytes()).unwrap_err();
        match err {
            Error::Validation(m) => assert!(m.contains("line 2") && m.contains("line 3"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ground_truth_labels_checked() {
        let gt = parse_ground_truth("label,start_s,end_s\ngun,1,2\n".as_bytes()).unwrap();
        assert!(gt.check_labels(&["gun".into()]).is_ok());
        assert!(gt.check_labels(&["glass".into()]).is_err());
    }

    proptest! {
        #[test]
        fn pcm16_round_trip_is_bit_exact(raw in prop::collection::vec(any::<i16>(), 1..400)) {
            let samples: Vec<f64> = raw.iter().map(|&v| v as f64 / 32768.0).collect();
            let clip = AudioClip::new(samples, 22050).unwrap();
            let mut cursor = Cursor::new(Vec::new());
            write_wav_to(&mut cursor, &clip, WavEncoding::Pcm16).unwrap();
            let back = read_wav_from(Cursor::new(cursor.into_inner())).unwrap();
            prop_assert_eq!(back, clip);
        }

        #[test]
        fn resample_is_amplitude_linear(
            raw in prop::collection::vec(-0.5f64..0.5, 2..300),
            alpha in -2.0f64..2.0,
            target in prop::sample::select(vec![8000u32, 16000, 22050, 44100, 48000]),
        ) {
            let clip = AudioClip::new(raw.clone(), 32000).unwrap();
            let scaled = AudioClip::new(raw.iter().map(|s| s * alpha).collect(), 32000).unwrap();
            let a = resample(&clip, target).unwrap();
            let b = resample(&scaled, target).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.samples().iter().zip(b.samples()) {
                prop_assert!((x * alpha - y).abs() <= 1e-12);
            }
        }
    }
}
