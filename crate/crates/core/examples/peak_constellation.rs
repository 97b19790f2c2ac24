//! Local energy peaks of a Gammatonegram and the reference point used when
//! configuring an extractor.
//!
//! ```bash
//! cargo run --release --example peak_constellation
//! ```

use cope::config::PipelineConfig;
use cope::peaks::reference_point;
use cope::pipeline::Analyzer;
use cope::synth::EventKind;

fn main() -> cope::error::Result<()> {
    let analyzer = Analyzer::from_config(&PipelineConfig::default())?;
    for kind in EventKind::ALL {
        let clip = kind.generate(32000, 1)?;
        let c = analyzer.constellation(&clip)?;
        let r = reference_point(&c)?;
        let busiest = (0..c.channels()).max_by_key(|&k| c.channel_peaks(k).len()).unwrap_or(0);
        println!(
            "{:6}: {:.2} s, {} frames, {} peaks; reference at frame {} channel {} (energy {:.3}); \
             busiest channel {busiest} with {} peaks",
            kind.name(),
            clip.duration_s(),
            c.frames(),
            c.len(),
            r.frame,
            r.channel,
            r.energy,
            c.channel_peaks(busiest).len()
        );
    }

    let c = analyzer.constellation(&EventKind::Chirp.generate(32000, 1)?)?;
    let strong = c.retain(|p| p.energy >= 0.25);
    println!("chirp peaks with energy >= 0.25: {}", strong.len());
    let out = std::env::temp_dir().join("cope_chirp_peaks.csv");
    c.write_csv(std::fs::File::create(&out)?)?;
    println!("wrote {}", out.display());
    Ok(())
}
