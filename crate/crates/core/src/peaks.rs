//! Local energy peaks of a Gammatonegram.
//!
//! A cell is a peak when its energy is positive and strictly larger than every
//! in-bounds cell of its 8-connected neighborhood. Plateaus produce no peak.

use std::io::Write;

use crate::error::{Error, Result};
use crate::gammatone::{FrontEnd, Gammatonegram};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frame: usize,
    pub channel: usize,
    pub energy: f64,
}

/// Sparse set of peaks, sorted by frame then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakConstellation {
    peaks: Vec<Peak>,
    frames: usize,
    frontend: FrontEnd,
    // Per channel: (frame, energy) in frame order.
    by_channel: Vec<Vec<(usize, f64)>>,
}

impl PeakConstellation {
    /// Builds a constellation from explicit peaks, validating positions,
    /// energies and uniqueness.
    pub fn from_peaks(frontend: FrontEnd, frames: usize, mut peaks: Vec<Peak>) -> Result<Self> {
        let channels = frontend.filterbank.num_channels;
        for p in &peaks {
            if p.frame >= frames || p.channel >= channels {
                return Err(Error::Validation(format!(
                    "peak ({}, {}) outside {channels}x{frames}",
                    p.frame, p.channel
                )));
            }
            if !(p.energy > 0.0 && p.energy.is_finite()) {
                return Err(Error::Validation(format!(
                    "peak ({}, {}) has non-positive energy",
                    p.frame, p.channel
                )));
            }
        }
        peaks.sort_by_key(|p| (p.frame, p.channel));
        if peaks
            .windows(2)
            .any(|w| (w[0].frame, w[0].channel) == (w[1].frame, w[1].channel))
        {
            return Err(Error::Validation("duplicate peak position".into()));
        }
        let mut by_channel = vec![Vec::new(); channels];
        for p in &peaks {
            by_channel[p.channel].push((p.frame, p.energy));
        }
        Ok(Self {
            peaks,
            frames,
            frontend,
            by_channel,
        })
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.by_channel.len()
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.frontend
    }

    /// Peaks of one channel as `(frame, energy)`, in frame order.
    pub fn channel_peaks(&self, channel: usize) -> &[(usize, f64)] {
        &self.by_channel[channel]
    }

    /// Peak-map value: the stored energy at `(frame, channel)` or 0.
    pub fn energy_at(&self, frame: i64, channel: i64) -> f64 {
        if frame < 0 || channel < 0 || channel as usize >= self.channels() {
            return 0.0;
        }
        let row = &self.by_channel[channel as usize];
        row.binary_search_by_key(&(frame as usize), |&(t, _)| t)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// Keeps only the peaks for which `keep` is true.
    pub fn retain(&self, keep: impl Fn(&Peak) -> bool) -> Self {
        let peaks = self.peaks.iter().copied().filter(|p| keep(p)).collect();
        Self::from_peaks(self.frontend, self.frames, peaks).expect("subset of a valid constellation")
    }

    /// CSV `t,f,e`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["t", "f", "e"])?;
        for p in &self.peaks {
            w.write_record([p.frame.to_string(), p.channel.to_string(), p.energy.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Extracts the strict 8-connected local maxima of `g`.
pub fn extract_peaks(g: &Gammatonegram) -> PeakConstellation {
    let (channels, frames) = (g.channels(), g.frames());
    let mut peaks = Vec::new();
    for t in 0..frames {
        let t_lo = t.saturating_sub(1);
        let t_hi = (t + 1).min(frames - 1);
        for f in 0..channels {
            let e = g.get(f, t);
            if e <= 0.0 {
                continue;
            }
            let f_lo = f.saturating_sub(1);
            let f_hi = (f + 1).min(channels - 1);
            let is_peak = (f_lo..=f_hi).all(|nf| {
                (t_lo..=t_hi).all(|nt| (nf == f && nt == t) || g.get(nf, nt) < e)
            });
            if is_peak {
                peaks.push(Peak {
                    frame: t,
                    channel: f,
                    energy: e,
                });
            }
        }
    }
    PeakConstellation::from_peaks(*g.frontend(), frames, peaks).expect("peaks lie inside g")
}

/// Highest-energy peak; ties go to the earliest frame, then lowest channel.
pub fn reference_point(c: &PeakConstellation) -> Result<Peak> {
    // Peaks are sorted by (frame, channel), so the first maximum wins ties.
    c.peaks
        .iter()
        .copied()
        .reduce(|best, p| if p.energy > best.energy { p } else { best })
        .ok_or(Error::NoPeaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gammatone::FilterbankSpec;
    use proptest::prelude::*;

    pub(crate) fn frontend(channels: usize) -> FrontEnd {
        FrontEnd {
            filterbank: FilterbankSpec {
                num_channels: channels,
                ..FilterbankSpec::default()
            },
            frame_size: 1024,
            normalize: false,
        }
    }

    fn gram(rows: &[&[f64]]) -> Gammatonegram {
        let frames = rows[0].len();
        Gammatonegram::from_energies(frontend(rows.len()), frames, rows.concat()).unwrap()
    }

    /// Literal neighborhood check, independent of the scan above.
    fn brute_force(g: &Gammatonegram) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for t in 0..g.frames() as i64 {
            for f in 0..g.channels() as i64 {
                let e = g.get(f as usize, t as usize);
                if e <= 0.0 {
                    continue;
                }
                let mut ok = true;
                for dt in -1..=1i64 {
                    for df in -1..=1i64 {
                        let (nt, nf) = (t + dt, f + df);
                        if (dt, df) == (0, 0)
                            || nt < 0
                            || nf < 0
                            || nt >= g.frames() as i64
                            || nf >= g.channels() as i64
                        {
                            continue;
                        }
                        ok &= g.get(nf as usize, nt as usize) < e;
                    }
                }
                if ok {
                    out.push((t as usize, f as usize));
                }
            }
        }
        out
    }

    #[test]
    fn constant_matrix_has_no_peaks() {
        let g = gram(&[&[0.5; 6], &[0.5; 6], &[0.5; 6]]);
        assert!(extract_peaks(&g).is_empty());
    }

    #[test]
    fn single_nonzero_cell() {
        let g = gram(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.3], &[0.0; 3]]);
        let c = extract_peaks(&g);
        assert_eq!(
            c.peaks(),
            &[Peak {
                frame: 2,
                channel: 1,
                energy: 0.3
            }]
        );
    }

    #[test]
    fn pyramid_has_single_center_peak() {
        let g = gram(&[&[1.0, 2.0, 1.0], &[2.0, 5.0, 2.0], &[1.0, 2.0, 1.0]]);
        let c = extract_peaks(&g);
        assert_eq!(brute_force(&g), vec![(1, 1)]);
        assert_eq!(
            c.peaks(),
            &[Peak {
                frame: 1,
                channel: 1,
                energy: 5.0
            }]
        );
    }

    #[test]
    fn reference_point_rules() {
        let fe = frontend(4);
        let one = PeakConstellation::from_peaks(
            fe,
            10,
            vec![Peak {
                frame: 3,
                channel: 2,
                energy: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(reference_point(&one).unwrap().frame, 3);
        let tie = PeakConstellation::from_peaks(
            fe,
            10,
            vec![
                Peak { frame: 5, channel: 0, energy: 3.0 },
                Peak { frame: 2, channel: 1, energy: 7.0 },
                Peak { frame: 9, channel: 0, energy: 7.0 },
                Peak { frame: 2, channel: 3, energy: 7.0 },
            ],
        )
        .unwrap();
        let r = reference_point(&tie).unwrap();
        assert_eq!((r.frame, r.channel, r.energy), (2, 1, 7.0));
        let empty = PeakConstellation::from_peaks(fe, 10, vec![]).unwrap();
        assert!(matches!(reference_point(&empty), Err(Error::NoPeaks)));
    }

    #[test]
    fn constellation_rejects_invalid_peaks() {
        let fe = frontend(2);
        let p = |frame, channel, energy| Peak { frame, channel, energy };
        assert!(PeakConstellation::from_peaks(fe, 3, vec![p(3, 0, 1.0)]).is_err());
        assert!(PeakConstellation::from_peaks(fe, 3, vec![p(0, 2, 1.0)]).is_err());
        assert!(PeakConstellation::from_peaks(fe, 3, vec![p(0, 0, 0.0)]).is_err());
        assert!(PeakConstellation::from_peaks(fe, 3, vec![p(1, 1, 1.0), p(1, 1, 2.0)]).is_err());
    }

    #[test]
    fn energy_lookup_and_csv() {
        let g = gram(&[&[0.0, 0.9, 0.0], &[0.1, 0.0, 0.0]]);
        let c = extract_peaks(&g);
        assert_eq!(c.energy_at(1, 0), 0.9);
        assert_eq!(c.energy_at(0, 0), 0.0);
        assert_eq!(c.energy_at(-1, 0), 0.0);
        assert_eq!(c.energy_at(1, 5), 0.0);
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,f,e\n1,0,0.9\n");
    }

    fn matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..12, 2usize..30).prop_flat_map(|(ch, fr)| {
            // Small integer levels make plateaus and ties common.
            prop::collection::vec((0u8..6).prop_map(|v| v as f64 * 0.2), ch * fr)
                .prop_map(move |e| (ch, fr, e))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((ch, fr, e) in matrix()) {
            let g = Gammatonegram::from_energies(frontend(ch), fr, e).unwrap();
            let got: Vec<(usize, usize)> =
                extract_peaks(&g).peaks().iter().map(|p| (p.frame, p.channel)).collect();
            prop_assert_eq!(got, brute_force(&g));
        }

        #[test]
        fn positions_invariant_under_positive_scaling((ch, fr, e) in matrix(), alpha in 0.01f64..50.0) {
            let g = Gammatonegram::from_energies(frontend(ch), fr, e.clone()).unwrap();
            let scaled = Gammatonegram::from_energies(
                frontend(ch), fr, e.iter().map(|v| v * alpha).collect()).unwrap();
            let a = extract_peaks(&g);
            let b = extract_peaks(&scaled);
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.peaks().iter().zip(b.peaks()) {
                prop_assert_eq!((p.frame, p.channel), (q.frame, q.channel));
                prop_assert!((p.energy * alpha - q.energy).abs() <= 1e-12 * q.energy);
            }
        }

        #[test]
        fn every_peak_is_a_strict_maximum((ch, fr, e) in matrix()) {
            let g = Gammatonegram::from_energies(frontend(ch), fr, e).unwrap();
            for p in extract_peaks(&g).peaks() {
                prop_assert_eq!(p.energy, g.get(p.channel, p.frame));
                for nf in p.channel.saturating_sub(1)..=(p.channel + 1).min(ch - 1) {
                    for nt in p.frame.saturating_sub(1)..=(p.frame + 1).min(fr - 1) {
                        if (nf, nt) != (p.channel, p.frame) {
                            prop_assert!(g.get(nf, nt) < p.energy);
                        }
                    }
                }
            }
        }

        #[test]
        fn reference_is_brute_force_argmax((ch, fr, e) in matrix()) {
            let g = Gammatonegram::from_energies(frontend(ch), fr, e).unwrap();
            let c = extract_peaks(&g);
            match reference_point(&c) {
                Err(_) => prop_assert!(c.is_empty()),
                Ok(r) => {
                    let mut best: Option<Peak> = None;
                    for t in 0..fr {
                        for f in 0..ch {
                            let e = c.energy_at(t as i64, f as i64);
                            if e > 0.0 && best.is_none_or(|b| e > b.energy) {
                                best = Some(Peak { frame: t, channel: f, energy: e });
                            }
                        }
                    }
                    prop_assert_eq!(Some(r), best);
                }
            }
        }
    }
}
