//! Auditory front-end: ERB-spaced gammatone filterbank and the framed
//! energy map (Gammatonegram) of a synthetic tone complex.
//!
//! ```bash
//! cargo run --release --example gammatonegram
//! ```

use cope::gammatone::{center_frequencies, design_filterbank, erb_bandwidth, gammatonegram, FilterbankSpec};
use cope::synth::tone_complex;

fn main() -> cope::error::Result<()> {
    let spec = FilterbankSpec::default();
    let fb = design_filterbank(&spec)?;
    let cfs = center_frequencies(&spec);
    println!("{} channels, {:.0}..{:.0} Hz at {} Hz", fb.len(), spec.f_min, spec.f_max, spec.sample_rate);
    for k in [0, 16, 32, 48, 63] {
        println!(
            "  channel {k:2}: fc = {:7.1} Hz  ERB = {:6.1} Hz  IR = {} samples",
            cfs[k],
            erb_bandwidth(cfs[k], &spec),
            fb.filters()[k].impulse_response().len()
        );
    }

    let clip = tone_complex(32000, 440.0, 6, 4.0, spec.sample_rate)?;
    let g = gammatonegram(&clip, &fb, 1024, true)?;
    println!("1 s clip -> {} frames x {} channels (hop {:.1} ms)", g.frames(), g.channels(), g.frontend().hop_s() * 1e3);

    // Mean energy per channel; the harmonics of 440 Hz stand out.
    let mut means: Vec<(usize, f64)> = (0..g.channels())
        .map(|k| (k, g.channel(k).iter().sum::<f64>() / g.frames() as f64))
        .collect();
    means.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (k, m) in means.iter().take(6) {
        println!("  strong channel {k:2} ({:7.1} Hz): mean energy {m:.3}", cfs[*k]);
    }

    let out = std::env::temp_dir().join("cope_gammatonegram.csv");
    g.write_csv(std::fs::File::create(&out)?)?;
    println!("wrote {}", out.display());
    Ok(())
}
