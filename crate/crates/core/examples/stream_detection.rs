//! End to end: train on isolated synthetic events, mix a test stream,
//! detect events with a sliding window and score the result.
//!
//! ```bash
//! cargo run --release --example stream_detection
//! ```

use cope::audio::GroundTruth;
use cope::config::PipelineConfig;
use cope::eval::{det_curve, score_events, score_thresholds, sliding_detection_with};
use cope::mixer::{mix_events, EventSpec};
use cope::pipeline::{class_list, train_system, Analyzer};
use cope::synth::{babble, white_noise, EventKind};

fn main() -> cope::error::Result<()> {
    let rate = 32000;
    let mut cfg = PipelineConfig::default();
    cfg.cope.prototypes_per_class = Some(2);
    let analyzer = Analyzer::from_config(&cfg)?;

    let mut consts = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    for kind in EventKind::ALL {
        for seed in 0..6 {
            consts.push(analyzer.constellation(&kind.generate(rate, seed)?)?);
            labels.push(Some(kind.name().to_string()));
            names.push(format!("{}{seed}", kind.name()));
        }
    }
    // Background negatives of both kinds the detector will meet.
    for seed in 0..16 {
        let bg = if seed % 4 == 0 {
            white_noise(rate as usize * 3, 0.05, rate, 100 + seed)?
        } else {
            babble(rate as usize * 3, 0.03, rate, 100 + seed)?
        };
        consts.push(analyzer.constellation(&bg)?);
        labels.push(None);
        names.push(format!("bg{seed}"));
    }
    let classes = class_list(&labels);
    let system = train_system(&consts, &labels, &names, &classes, &cfg)?;
    println!("trained {} extractors for classes {classes:?}", system.bank.len());

    let bg = babble(rate as usize * 40, 0.03, rate, 7)?;
    let events: Vec<_> = (0..9)
        .map(|i| EventKind::ALL[i % 3].generate(rate, 500 + i as u64))
        .collect::<cope::error::Result<_>>()?;
    let specs: Vec<EventSpec> = events
        .iter()
        .enumerate()
        .map(|(i, clip)| EventSpec {
            clip,
            t0_s: Some(2.0 + 4.2 * i as f64),
            snr_db: 15.0,
            label: EventKind::ALL[i % 3].name(),
            seed: 0,
        })
        .collect();
    let mix = mix_events(&bg, &specs)?;
    let truth = GroundTruth::new(mix.truth)?;

    let det = sliding_detection_with(&mix.clip, analyzer.filterbank(), &system.bank, &system.model, cfg.eval.windows())?;
    let report = score_events(&det.records, &truth, &classes)?;
    print!("{report}");

    let curve = det_curve(&det.records, &truth, &classes, &score_thresholds(&det.records))?;
    let out = std::env::temp_dir().join("cope_det.svg");
    std::fs::write(&out, curve.to_svg())?;
    println!("DET curve with {} points -> {}", curve.points.len(), out.display());
    Ok(())
}
