//! Cross-validated sensitivity of error and false-positive rates to the
//! extractor tolerance sigma0.
//!
//! ```bash
//! cargo run --release --example sigma_sweep
//! ```

use cope::config::PipelineConfig;
use cope::pipeline::{assign_folds, LabeledClip};
use cope::sweep::{run_sweep, SweepConfig, SweepParam};
use cope::synth::{white_noise, EventKind};

fn main() -> cope::error::Result<()> {
    let rate = 32000;
    let mut data = Vec::new();
    for kind in EventKind::ALL {
        for seed in 0..8 {
            data.push(LabeledClip {
                name: format!("{}{seed}", kind.name()),
                clip: kind.generate(rate, seed)?,
                label: Some(kind.name().to_string()),
            });
        }
    }
    for seed in 0..8 {
        data.push(LabeledClip {
            name: format!("bg{seed}"),
            clip: white_noise(rate as usize, 0.05, rate, 1000 + seed)?,
            label: None,
        });
    }
    let mut base = PipelineConfig::default();
    base.cope.prototypes_per_class = Some(2);
    let labels: Vec<_> = data.iter().map(|d| d.label.clone()).collect();
    let folds = assign_folds(&labels, 4, base.seed);
    let table = run_sweep(
        &data,
        &folds,
        &SweepConfig {
            parameter: SweepParam::Sigma0,
            values: vec![1.0, 2.0, 3.0, 5.0, 8.0],
            base,
            folds: 4,
        },
    )?;
    let pct = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |x| format!("{:5.1}%", 100.0 * x));
    println!("sigma0      ER  +-sd      FPR  +-sd");
    for r in &table.rows {
        println!("{:6} {} {} {} {}", r.value, pct(r.er), pct(r.sigma_er), pct(r.fpr), pct(r.sigma_fpr));
    }
    table.write_csv(std::io::stdout())?;
    Ok(())
}
