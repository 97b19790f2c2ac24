//! Places events on a background at controlled signal-to-noise ratios and
//! writes the mixture with its ground truth.
//!
//! ```bash
//! cargo run --release --example snr_mixing
//! ```

use cope::audio::{write_wav, GroundTruth, WavEncoding};
use cope::mixer::{measure_snr, mix_events, EventSpec};
use cope::synth::{babble, EventKind};

fn main() -> cope::error::Result<()> {
    let rate = 32000;
    let bg = babble(rate as usize * 10, 0.01, rate, 1)?;
    let events: Vec<_> = EventKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| k.generate(rate, 10 + i as u64).map(|c| (k.name(), c)))
        .collect::<cope::error::Result<_>>()?;
    let specs: Vec<EventSpec> = events
        .iter()
        .enumerate()
        .map(|(i, (label, clip))| EventSpec {
            clip,
            t0_s: Some(1.0 + 3.0 * i as f64),
            snr_db: [20.0, 5.0, -5.0][i],
            label,
            seed: 0,
        })
        .collect();
    let mix = mix_events(&bg, &specs)?;
    for (e, g) in mix.truth.iter().zip(&mix.gains) {
        let (a, b) = ((e.start_s * rate as f64) as usize, (e.end_s * rate as f64) as usize);
        let snr = measure_snr(&mix.clip.samples()[a..b], &bg.samples()[a..b])?;
        println!("{:6} {:.2}-{:.2} s  gain {g:.3}  measured SNR {snr:6.2} dB", e.label, e.start_s, e.end_s);
    }
    println!("clipped samples: {}", mix.clipped_samples);

    // Seeded random placement is reproducible.
    let random = EventSpec { t0_s: None, seed: 42, ..specs[0] };
    let a = mix_events(&bg, &[random])?;
    let b = mix_events(&bg, &[random])?;
    println!("random onset {:.3} s (repeatable: {})", a.truth[0].start_s, a == b);

    let dir = std::env::temp_dir();
    write_wav(dir.join("cope_mix.wav"), &mix.clip, WavEncoding::Float32)?;
    GroundTruth::new(mix.truth)?.write_csv(std::fs::File::create(dir.join("cope_mix.csv"))?)?;
    println!("wrote {}", dir.join("cope_mix.wav").display());
    Ok(())
}
