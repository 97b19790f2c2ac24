//! Gammatone filterbank and the Gammatonegram time-frequency representation.
//!
//! Each channel is a sampled FIR realization of the gammatone impulse response
//!
//! ```text
//! h(t) = a t^(n-1) exp(-2 pi B t) cos(2 pi w t + phi),   t >= 0
//! ```
//!
//! with `B = ERB(w)` and the envelope truncated once it has decayed
//! `ir_truncation_db` below its maximum. Center frequencies are spaced
//! uniformly on the ERB-rate scale. Filtering is done by FFT convolution, one
//! channel per task, and the Gammatonegram entry `(i, j)` is the RMS of channel
//! `i` over frame `j` (frames of `F` samples, hop `F/2`).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Asymptotic filter quality at high frequencies (Glasberg & Moore).
pub const Q_EAR: f64 = 9.26779;
/// Minimum bandwidth at low frequencies, Hz (Glasberg & Moore).
pub const B_MIN: f64 = 24.7;

/// Parameters of a gammatone filterbank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterbankSpec {
    pub num_channels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub order: u32,
    pub q_ear: f64,
    pub b_min: f64,
    pub p: f64,
    pub sample_rate: u32,
    pub ir_truncation_db: f64,
}

impl FilterbankSpec {
    /// 64 fourth-order channels from 100 Hz to 90% of Nyquist.
    pub fn with_rate(sample_rate: u32) -> Self {
        Self {
            num_channels: 64,
            f_min: 100.0,
            f_max: 0.45 * sample_rate as f64,
            order: 4,
            q_ear: Q_EAR,
            b_min: B_MIN,
            p: 1.0,
            sample_rate,
            ir_truncation_db: 60.0,
        }
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.sample_rate == 0 {
            return fail("sample rate must be positive".into());
        }
        if self.num_channels < 2 {
            return fail(format!("need at least 2 channels, got {}", self.num_channels));
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return fail(format!(
                "need 0 < f_min < f_max, got {} and {}",
                self.f_min, self.f_max
            ));
        }
        if self.f_max > self.nyquist() {
            return fail(format!(
                "f_max {} Hz above Nyquist {} Hz",
                self.f_max,
                self.nyquist()
            ));
        }
        if self.order < 1 {
            return fail("filter order must be at least 1".into());
        }
        if !(self.q_ear > 0.0 && self.b_min > 0.0 && self.p > 0.0) {
            return fail("q_ear, b_min and p must be positive".into());
        }
        if !(self.ir_truncation_db > 0.0 && self.ir_truncation_db.is_finite()) {
            return fail("ir_truncation_db must be positive".into());
        }
        Ok(())
    }
}

impl Default for FilterbankSpec {
    fn default() -> Self {
        Self::with_rate(32000)
    }
}

/// Equivalent rectangular bandwidth `[(w/Q_ear)^p + B_min^p]^(1/p)`.
pub fn erb_bandwidth(freq: f64, spec: &FilterbankSpec) -> f64 {
    ((freq / spec.q_ear).powf(spec.p) + spec.b_min.powf(spec.p)).powf(1.0 / spec.p)
}

/// Number of ERBs below `freq`, i.e. the integral of `1/ERB` from 0.
pub fn erb_rate(freq: f64, spec: &FilterbankSpec) -> f64 {
    if spec.p == 1.0 {
        return spec.q_ear * (1.0 + freq / (spec.q_ear * spec.b_min)).ln();
    }
    // Composite Simpson; the integrand is smooth and monotone.
    let n = 4096;
    let h = freq / n as f64;
    let g = |x: f64| 1.0 / erb_bandwidth(x, spec);
    let inner: f64 = (1..n)
        .map(|k| {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            w * g(k as f64 * h)
        })
        .sum();
    h / 3.0 * (g(0.0) + inner + g(freq))
}

fn erb_rate_inverse(rate: f64, spec: &FilterbankSpec) -> f64 {
    if spec.p == 1.0 {
        return ((rate / spec.q_ear).exp() - 1.0) * spec.q_ear * spec.b_min;
    }
    let (mut lo, mut hi) = (0.0, spec.nyquist());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if erb_rate(mid, spec) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Center frequencies spaced uniformly on the ERB-rate scale, low to high.
pub fn center_frequencies(spec: &FilterbankSpec) -> Vec<f64> {
    let lo = erb_rate(spec.f_min, spec);
    let hi = erb_rate(spec.f_max, spec);
    let last = (spec.num_channels - 1) as f64;
    (0..spec.num_channels)
        .map(|i| match i {
            0 => spec.f_min,
            i if i == spec.num_channels - 1 => spec.f_max,
            i => erb_rate_inverse(lo + (hi - lo) * i as f64 / last, spec),
        })
        .collect()
}

/// One sampled gammatone channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GammatoneFilter {
    /// Frequency of maximal magnitude response, Hz.
    pub center_freq: f64,
    /// Frequency of the cosine carrier, Hz. Equal to `center_freq` up to the
    /// small pull that the aliased spectral image exerts near Nyquist.
    pub carrier_freq: f64,
    /// ERB of `center_freq`, Hz.
    pub bandwidth: f64,
    /// Gain that brings the magnitude response peak to 1.
    pub gain: f64,
    pub phase: f64,
    impulse_response: Vec<f64>,
}

impl GammatoneFilter {
    pub fn impulse_response(&self) -> &[f64] {
        &self.impulse_response
    }

    /// Magnitude of the discrete-time frequency response at `freq` Hz.
    pub fn magnitude_at(&self, freq: f64, sample_rate: u32) -> f64 {
        dtft_magnitude(&self.impulse_response, freq, sample_rate)
    }
}

fn dtft_magnitude(h: &[f64], freq: f64, sample_rate: u32) -> f64 {
    let omega = 2.0 * PI * freq / sample_rate as f64;
    let z = Complex::new(omega.cos(), -omega.sin());
    h.iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &v| acc * z + v)
        .norm()
}

/// Golden-section search for the magnitude maximum inside `[lo, hi]`.
fn magnitude_peak(h: &[f64], lo: f64, hi: f64, sample_rate: u32) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = dtft_magnitude(h, c, sample_rate);
    let mut fd = dtft_magnitude(h, d, sample_rate);
    while b - a > 1e-7 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = dtft_magnitude(h, c, sample_rate);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = dtft_magnitude(h, d, sample_rate);
        }
    }
    let f = 0.5 * (a + b);
    (f, dtft_magnitude(h, f, sample_rate))
}

fn sampled_envelope(bandwidth: f64, spec: &FilterbankSpec) -> Vec<f64> {
    let fs = spec.sample_rate as f64;
    let power = spec.order as i32 - 1;
    let decay = 2.0 * PI * bandwidth;
    let env = |k: usize| {
        let t = k as f64 / fs;
        t.powi(power) * (-decay * t).exp()
    };
    let t_peak = power as f64 / decay;
    let peak = {
        let t = t_peak;
        t.powi(power) * (-decay * t).exp()
    };
    let floor = peak * 10f64.powf(-spec.ir_truncation_db / 20.0);
    let k_peak = (t_peak * fs).ceil() as usize;
    let cap = 20 * spec.sample_rate as usize;
    let end = (k_peak..cap).find(|&k| env(k) < floor).unwrap_or(cap);
    (0..end.max(1)).map(env).collect()
}

fn design_filter(center: f64, spec: &FilterbankSpec) -> GammatoneFilter {
    let fs = spec.sample_rate as f64;
    let bandwidth = erb_bandwidth(center, spec);
    let envelope = sampled_envelope(bandwidth, spec);
    let carry = |carrier: f64| -> Vec<f64> {
        envelope
            .iter()
            .enumerate()
            .map(|(k, e)| e * (2.0 * PI * carrier * k as f64 / fs).cos())
            .collect()
    };
    let lo = (center - 0.5 * bandwidth).max(1e-3);
    let hi = (center + 0.5 * bandwidth).min(spec.nyquist() - 1e-3);

    // Shift the carrier until the sampled response peaks at `center`.
    let mut carrier = center;
    let mut h = carry(carrier);
    let (mut peak_f, mut peak_mag) = magnitude_peak(&h, lo, hi, spec.sample_rate);
    for _ in 0..50 {
        let miss = peak_f - center;
        if miss.abs() <= 1e-4 {
            break;
        }
        carrier = (carrier - miss).clamp(1e-3, spec.nyquist() - 1e-3);
        h = carry(carrier);
        (peak_f, peak_mag) = magnitude_peak(&h, lo, hi, spec.sample_rate);
    }
    let gain = 1.0 / peak_mag;
    h.iter_mut().for_each(|v| *v *= gain);
    GammatoneFilter {
        center_freq: center,
        carrier_freq: carrier,
        bandwidth,
        gain,
        phase: 0.0,
        impulse_response: h,
    }
}

/// A designed bank of gammatone filters ordered from low to high frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    spec: FilterbankSpec,
    filters: Vec<GammatoneFilter>,
}

impl Filterbank {
    pub fn design(spec: &FilterbankSpec) -> Result<Self> {
        spec.validate()?;
        let filters = center_frequencies(spec)
            .into_par_iter()
            .map(|f| design_filter(f, spec))
            .collect();
        Ok(Self {
            spec: *spec,
            filters,
        })
    }

    pub fn spec(&self) -> &FilterbankSpec {
        &self.spec
    }

    pub fn filters(&self) -> &[GammatoneFilter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    fn max_ir_len(&self) -> usize {
        self.filters
            .iter()
            .map(|f| f.impulse_response.len())
            .max()
            .unwrap_or(1)
    }
}

pub fn design_filterbank(spec: &FilterbankSpec) -> Result<Filterbank> {
    Filterbank::design(spec)
}

/// Linear convolution of one fixed signal against many kernels.
struct Convolver {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex<f64>>,
}

impl Convolver {
    fn new(signal: &[f64], max_kernel: usize) -> Self {
        let size = (signal.len() + max_kernel - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum: Vec<Complex<f64>> = signal
            .iter()
            .map(|&s| Complex::new(s, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(size)
            .collect();
        forward.process(&mut spectrum);
        Self {
            len: signal.len(),
            forward,
            inverse,
            spectrum,
        }
    }

    /// First `len` samples of `signal * kernel`.
    fn convolve(&self, kernel: &[f64]) -> Vec<f64> {
        let size = self.spectrum.len();
        let mut buf: Vec<Complex<f64>> = kernel
            .iter()
            .map(|&s| Complex::new(s, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(size)
            .collect();
        self.forward.process(&mut buf);
        buf.iter_mut()
            .zip(&self.spectrum)
            .for_each(|(b, x)| *b *= *x);
        self.inverse.process(&mut buf);
        let scale = 1.0 / size as f64;
        buf[..self.len].iter().map(|c| c.re * scale).collect()
    }
}

fn check_rate(clip: &AudioClip, fb: &Filterbank) -> Result<()> {
    if clip.sample_rate() != fb.spec.sample_rate {
        return Err(Error::RateMismatch {
            expected: fb.spec.sample_rate,
            found: clip.sample_rate(),
        });
    }
    Ok(())
}

/// Filters `clip` through every channel. Output `i` has the same length as the
/// input (the convolution tail is dropped).
pub fn apply_filterbank(clip: &AudioClip, fb: &Filterbank) -> Result<Vec<Vec<f64>>> {
    check_rate(clip, fb)?;
    let conv = Convolver::new(clip.samples(), fb.max_ir_len());
    Ok(fb
        .filters
        .par_iter()
        .map(|f| conv.convolve(&f.impulse_response))
        .collect())
}

/// `floor(2(N - F)/F) + 1` frames of `F` samples with hop `F/2`.
pub fn frame_count(num_samples: usize, frame_size: usize) -> usize {
    2 * (num_samples - frame_size) / frame_size + 1
}

/// Everything a time-frequency map depends on, used to check that models
/// and inputs come from the same analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontEnd {
    pub filterbank: FilterbankSpec,
    pub frame_size: usize,
    pub normalize: bool,
}

impl FrontEnd {
    pub fn hop(&self) -> usize {
        self.frame_size / 2
    }

    /// Seconds between consecutive frame starts.
    pub fn hop_s(&self) -> f64 {
        self.hop() as f64 / self.filterbank.sample_rate as f64
    }

    pub fn frame_start_s(&self, frame: usize) -> f64 {
        (frame * self.hop()) as f64 / self.filterbank.sample_rate as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.filterbank.validate()?;
        if self.frame_size < 2 || self.frame_size % 2 != 0 {
            return Err(Error::Spec(format!(
                "frame size must be even and at least 2, got {}",
                self.frame_size
            )));
        }
        Ok(())
    }

    /// Channel count, frame size and sample rate must agree; so must the
    /// rest of the filterbank.
    pub fn check_compatible(&self, other: &FrontEnd) -> Result<()> {
        let (a, b) = (&self.filterbank, &other.filterbank);
        if a.num_channels != b.num_channels {
            return Err(Error::Compatibility(format!(
                "{} vs {} channels",
                a.num_channels, b.num_channels
            )));
        }
        if self.frame_size != other.frame_size {
            return Err(Error::Compatibility(format!(
                "frame size {} vs {}",
                self.frame_size, other.frame_size
            )));
        }
        if a.sample_rate != b.sample_rate {
            return Err(Error::Compatibility(format!(
                "sample rate {} vs {}",
                a.sample_rate, b.sample_rate
            )));
        }
        if a != b {
            return Err(Error::Compatibility("filterbank parameters differ".into()));
        }
        Ok(())
    }
}

/// Channel-by-frame matrix of RMS energies.
#[derive(Debug, Clone, PartialEq)]
pub struct Gammatonegram {
    energies: Vec<f64>,
    frames: usize,
    frontend: FrontEnd,
    normalized: bool,
}

const BINARY_MAGIC: &[u8; 4] = b"GTGM";

impl Gammatonegram {
    /// Wraps a channel-major matrix (`energies[ch * frames + frame]`).
    pub fn from_energies(frontend: FrontEnd, frames: usize, energies: Vec<f64>) -> Result<Self> {
        let channels = frontend.filterbank.num_channels;
        if frames == 0 || energies.len() != channels * frames {
            return Err(Error::Validation(format!(
                "expected {channels}x{frames} energies, got {}",
                energies.len()
            )));
        }
        if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Validation(
                "energies must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            energies,
            frames,
            frontend,
            normalized: false,
        })
    }

    pub fn channels(&self) -> usize {
        self.frontend.filterbank.num_channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.frontend
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, channel: usize, frame: usize) -> f64 {
        self.energies[channel * self.frames + frame]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.energies[channel * self.frames..(channel + 1) * self.frames]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().copied().fold(0.0, f64::max)
    }

    /// Divides by the global maximum; all-zero maps are left untouched.
    pub fn normalize(&mut self) {
        let max = self.max_energy();
        if max > 0.0 {
            self.energies.iter_mut().for_each(|e| *e /= max);
        }
        self.normalized = true;
    }

    /// Rows are channels from low to high frequency, columns are frames.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        for ch in 0..self.channels() {
            w.write_record(self.channel(ch).iter().map(|e| e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian layout: `b"GTGM"`, then `u32` channels, frames, frame
    /// size and sample rate, then channel-major `f64` energies.
    pub fn write_binary<W: Write>(&self, mut sink: W) -> Result<()> {
        sink.write_all(BINARY_MAGIC)?;
        for v in [
            self.channels(),
            self.frames,
            self.frontend.frame_size,
            self.frontend.filterbank.sample_rate as usize,
        ] {
            sink.write_all(&(v as u32).to_le_bytes())?;
        }
        for e in &self.energies {
            sink.write_all(&e.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary layout back. `frontend` supplies the filterbank
    /// parameters the file does not carry and must agree with its header.
    pub fn read_binary<R: Read>(mut source: R, frontend: FrontEnd) -> Result<Self> {
        let mut magic = [0u8; 4];
        source.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a gammatonegram file".into()));
        }
        let mut header = [0u32; 4];
        for v in header.iter_mut() {
            let mut b = [0u8; 4];
            source.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [channels, frames, frame_size, rate] = header.map(|v| v as usize);
        if channels != frontend.filterbank.num_channels
            || frame_size != frontend.frame_size
            || rate != frontend.filterbank.sample_rate as usize
        {
            return Err(Error::Compatibility(
                "binary header disagrees with the supplied front-end".into(),
            ));
        }
        let mut energies = Vec::with_capacity(channels * frames);
        let mut b = [0u8; 8];
        for _ in 0..channels * frames {
            source.read_exact(&mut b)?;
            energies.push(f64::from_le_bytes(b));
        }
        let mut g = Self::from_energies(frontend, frames, energies)?;
        g.normalized = frontend.normalize;
        Ok(g)
    }
}

fn frame_rms(signal: &[f64], frame_size: usize, frames: usize) -> Vec<f64> {
    let hop = frame_size / 2;
    (0..frames)
        .map(|j| {
            let frame = &signal[j * hop..j * hop + frame_size];
            (frame.iter().map(|x| x * x).sum::<f64>() / frame_size as f64).sqrt()
        })
        .collect()
}

/// Computes the Gammatonegram of `clip`.
pub fn gammatonegram(
    clip: &AudioClip,
    fb: &Filterbank,
    frame_size: usize,
    normalize: bool,
) -> Result<Gammatonegram> {
    let frontend = FrontEnd {
        filterbank: fb.spec,
        frame_size,
        normalize,
    };
    frontend.validate()?;
    check_rate(clip, fb)?;
    if clip.len() < frame_size {
        return Err(Error::InputTooShort {
            samples: clip.len(),
            frame_size,
        });
    }
    let frames = frame_count(clip.len(), frame_size);
    let conv = Convolver::new(clip.samples(), fb.max_ir_len());
    let rows: Vec<Vec<f64>> = fb
        .filters
        .par_iter()
        .map(|f| frame_rms(&conv.convolve(&f.impulse_response), frame_size, frames))
        .collect();
    let mut g = Gammatonegram {
        energies: rows.concat(),
        frames,
        frontend,
        normalized: false,
    };
    if normalize {
        g.normalize();
    }
    Ok(g)
}
