//! The subcommand functions chained over files in a scratch directory, and
//! the binary's exit codes.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use cope::audio::{read_ground_truth, write_wav, WavEncoding};
use cope::cli::{cmd_configure, cmd_detect, cmd_evaluate, cmd_extract, cmd_mix, cmd_sweep, cmd_train, read_features, IntervalPolicy};
use cope::config::PipelineConfig;
use cope::eval::{read_records, MetricsReport};
use cope::sweep::SweepParam;
use cope::synth::{babble, white_noise, EventKind};

const RATE: u32 = 32000;

/// Writes event and background clips plus manifests; returns nothing, the
/// layout is fixed: `events/<kind><seed>.wav`, `bg/bg<seed>.wav`.
fn dataset(dir: &Path) {
    std::fs::create_dir_all(dir.join("events")).unwrap();
    std::fs::create_dir_all(dir.join("bg")).unwrap();
    let mut protos = String::from("path,label\n");
    let mut train = String::from("path,label\n");
    let mut sweep = String::from("path,label,fold\n");
    for kind in EventKind::ALL {
        for seed in 0..6u64 {
            let rel = format!("events/{}{seed}.wav", kind.name());
            write_wav(dir.join(&rel), &kind.generate(RATE, seed).unwrap(), WavEncoding::Float32).unwrap();
            if seed < 2 {
                writeln!(protos, "{rel},{}", kind.name()).unwrap();
            }
            writeln!(train, "{rel},{}", kind.name()).unwrap();
            writeln!(sweep, "{rel},{},{}", kind.name(), seed % 3).unwrap();
        }
    }
    for seed in 0..12u64 {
        let rel = format!("bg/bg{seed}.wav");
        let clip = if seed % 3 == 0 {
            white_noise(RATE as usize * 3, 0.05, RATE, 100 + seed).unwrap()
        } else {
            babble(RATE as usize * 3, 0.03, RATE, 100 + seed).unwrap()
        };
        write_wav(dir.join(&rel), &clip, WavEncoding::Float32).unwrap();
        writeln!(train, "{rel},").unwrap();
        writeln!(sweep, "{rel},,{}", seed % 3).unwrap();
    }
    std::fs::write(dir.join("protos.csv"), protos).unwrap();
    std::fs::write(dir.join("train.csv"), train).unwrap();
    std::fs::write(dir.join("sweep.csv"), sweep).unwrap();

    write_wav(dir.join("bg/stream.wav"), &babble(RATE as usize * 30, 0.01, RATE, 7).unwrap(), WavEncoding::Float32)
        .unwrap();
    let mut plan = String::from("background,event,t0_s,snr_db,label,seed\n");
    for i in 0..6 {
        let kind = EventKind::ALL[i % 3];
        let rel = format!("events/{}t{i}.wav", kind.name());
        write_wav(dir.join(&rel), &kind.generate(RATE, 900 + i as u64).unwrap(), WavEncoding::Float32).unwrap();
        writeln!(plan, "bg/stream.wav,{rel},{},15,{},0", 2.0 + 4.5 * i as f64, kind.name()).unwrap();
    }
    std::fs::write(dir.join("plan.csv"), plan).unwrap();
}

#[test]
fn configure_extract_train_mix_detect_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    dataset(d);
    let cfg = PipelineConfig::default();

    let bank = cmd_configure(&d.join("protos.csv"), &cfg, &d.join("bank.txt")).unwrap();
    assert_eq!(bank.len(), 6);

    let rows = cmd_extract(&d.join("train.csv"), &d.join("bank.txt"), &cfg, IntervalPolicy::Whole, &d.join("features.csv")).unwrap();
    assert_eq!(rows.len(), 30);
    assert_eq!(read_features(std::fs::File::open(d.join("features.csv")).unwrap()).unwrap(), rows);
    assert!(rows.iter().all(|r| r.values.len() == 6 && r.values.iter().all(|v| (0.0..=1.0).contains(v))));

    let model = cmd_train(&d.join("features.csv"), &cfg, &d.join("model.txt")).unwrap();
    assert_eq!(model.classes(), ["bursts", "chirp", "tone"]);

    let mixed = cmd_mix(&d.join("plan.csv"), &d.join("mix")).unwrap();
    assert_eq!(mixed.len(), 1);
    assert_eq!(mixed[0].clipped_samples, 0);
    assert_eq!(read_ground_truth(&mixed[0].truth).unwrap().len(), 6);

    let det = cmd_detect(&mixed[0].wav, &d.join("bank.txt"), &d.join("model.txt"), &cfg, &d.join("records.csv")).unwrap();
    assert_eq!(det.records.len(), 55);
    let (back, classes) = read_records(std::fs::File::open(d.join("records.csv")).unwrap()).unwrap();
    assert_eq!(classes, model.classes());
    assert_eq!(back.len(), det.records.len());

    let report = cmd_evaluate(&d.join("records.csv"), &mixed[0].truth, &d.join("eval")).unwrap();
    assert_eq!(report.events, 6);
    assert!(report.rr.unwrap() >= 5.0 / 6.0, "{report}");
    let json = std::fs::read_to_string(d.join("eval/metrics.json")).unwrap();
    assert_eq!(MetricsReport::from_json(&json).unwrap(), report);
    for f in ["metrics.txt", "det.csv", "det.svg", "roc.csv", "roc.svg"] {
        assert!(d.join("eval").join(f).metadata().unwrap().len() > 0, "{f}");
    }

    // Sliding extraction yields one row per window of each clip.
    let sliding = cmd_extract(&d.join("train.csv"), &d.join("bank.txt"), &cfg, IntervalPolicy::Sliding, &d.join("sliding.csv")).unwrap();
    assert_eq!(sliding.len(), 12);
    assert!(sliding.iter().all(|r| r.end_s - r.start_s == 3.0 && r.label.is_none()));
}

#[test]
fn extract_rejects_a_mismatched_frontend() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    dataset(d);
    let cfg = PipelineConfig::default();
    cmd_configure(&d.join("protos.csv"), &cfg, &d.join("bank.txt")).unwrap();
    let mut other = cfg.clone();
    other.frontend.channels = 32;
    let err = cmd_extract(&d.join("train.csv"), &d.join("bank.txt"), &other, IntervalPolicy::Whole, &d.join("f.csv")).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn sweep_over_a_manifest_with_folds() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    dataset(d);
    let mut cfg = PipelineConfig::default();
    cfg.cope.prototypes_per_class = Some(2);
    let table = cmd_sweep(&d.join("sweep.csv"), SweepParam::Sigma0, &[2.0, 5.0], 3, &cfg, &d.join("sweep_out.csv")).unwrap();
    assert_eq!(table.rows.len(), 2);
    for r in &table.rows {
        assert!(r.er.unwrap() <= 0.2, "{r:?}");
        assert!(r.sigma_er.unwrap() >= 0.0);
    }
    let text = std::fs::read_to_string(d.join("sweep_out.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

fn cope_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cope"))
}

#[test]
fn binary_exit_codes_and_config_dump() {
    let out = cope_bin().args(["--sigma0", "3", "--dump-config", "train", "--features", "x", "--out", "y"]).output().unwrap();
    assert!(out.status.success());
    let cfg = PipelineConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.cope.sigma0, 3.0);

    let usage = cope_bin().args(["train"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let invalid = cope_bin().args(["--frame-size", "1001", "train", "--features", "x", "--out", "y"]).output().unwrap();
    assert_eq!(invalid.status.code(), Some(2));
    let missing = cope_bin().args(["train", "--features", "/nonexistent/f.csv", "--out", "y"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.toml");
    std::fs::write(&cfg_path, "[cope]\nsigma0 = 2.5\n").unwrap();
    let out = cope_bin().arg("--config").arg(&cfg_path).args(["--dump-config", "mix", "--plan", "p", "--out-dir", "o"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("sigma0 = 2.5"));
    let threads = cope_bin().env("COPE_THREADS", "x").args(["mix", "--plan", "p", "--out-dir", "o"]).output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}
