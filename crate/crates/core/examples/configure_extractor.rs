//! Configures one COPE extractor on a prototype and shows how its response
//! behaves on the prototype itself, on a sibling instance, on other sounds
//! and on noise.
//!
//! ```bash
//! cargo run --release --example configure_extractor
//! ```

use cope::config::PipelineConfig;
use cope::cope::{configure_from_peaks, response, CopeParams};
use cope::pipeline::Analyzer;
use cope::synth::{white_noise, EventKind};

fn main() -> cope::error::Result<()> {
    let analyzer = Analyzer::from_config(&PipelineConfig::default())?;
    let proto = analyzer.constellation(&EventKind::ToneComplex.generate(32000, 1)?)?;
    let params = CopeParams::default();
    let ex = configure_from_peaks(&proto, params, "tone")?;
    println!(
        "extractor `{}`: {} tuples (sigma0 {}, t1 {}, support {} ms = +-{} frames)",
        ex.label(),
        ex.tuples().len(),
        params.sigma0,
        params.t1,
        params.support_ms,
        params.half_width_frames(ex.frontend())
    );
    for t in ex.tuples().iter().take(5) {
        println!("  dt {:+3}  channel {:2}  energy {:.3}", t.dt, t.channel, t.energy);
    }

    let probes = [
        ("prototype", proto.clone()),
        ("tone #2", analyzer.constellation(&EventKind::ToneComplex.generate(32000, 2)?)?),
        ("chirp", analyzer.constellation(&EventKind::Chirp.generate(32000, 2)?)?),
        ("bursts", analyzer.constellation(&EventKind::NoiseBursts.generate(32000, 2)?)?),
        ("noise", analyzer.constellation(&white_noise(24000, 0.1, 32000, 9)?)?),
    ];
    for (name, c) in &probes {
        let r = response(c, &ex)?;
        let peak = r.values()[r.argmax()];
        println!("  {name:10} max response {peak:.3} at frame {}", r.argmax());
    }

    // A looser tolerance forgives larger deviations from the prototype.
    let sibling = &probes[1].1;
    for sigma0 in [1.0, 3.0, 5.0, 8.0] {
        let r = response(sibling, &ex.with_sigma0(sigma0)?)?;
        println!("  tone #2 with sigma0 {sigma0}: {:.3}", r.values()[r.argmax()]);
    }
    Ok(())
}
