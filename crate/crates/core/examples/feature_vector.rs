//! Builds a bank of extractors (one per prototype) and pools their
//! responses into feature vectors over time intervals.
//!
//! ```bash
//! cargo run --release --example feature_vector
//! ```

use cope::config::PipelineConfig;
use cope::cope::extract_vector;
use cope::pipeline::{build_bank, Analyzer};
use cope::synth::EventKind;

fn main() -> cope::error::Result<()> {
    let cfg = PipelineConfig::default();
    let analyzer = Analyzer::from_config(&cfg)?;
    let mut protos = Vec::new();
    for kind in EventKind::ALL {
        for seed in 0..2 {
            let c = analyzer.constellation(&kind.generate(32000, seed)?)?;
            protos.push((format!("{}{seed}", kind.name()), c, kind.name()));
        }
    }
    let refs: Vec<_> = protos.iter().map(|(n, c, l)| (n.as_str(), c, *l)).collect();
    let bank = build_bank(&refs, cfg.cope.params())?;
    let labels: Vec<&str> = bank.extractors().iter().map(|e| e.label()).collect();
    println!("bank of {} extractors: {labels:?}", bank.len());

    for kind in EventKind::ALL {
        let c = analyzer.constellation(&kind.generate(32000, 77)?)?;
        let end = (c.frames() - 1) as f64 * c.frontend().hop_s();
        let v = extract_vector(&c, &bank, 0.0, end)?;
        let cells: Vec<String> = v.values.iter().map(|x| format!("{x:.2}")).collect();
        println!("{:6} [0, {end:.2}] s -> [{}]", kind.name(), cells.join(", "));
    }

    let out = std::env::temp_dir().join("cope_bank.txt");
    bank.save(&out)?;
    println!("saved bank to {}", out.display());
    Ok(())
}
