//! Command-line front end. Each subcommand is a plain function over paths
//! and a [`PipelineConfig`], so scripts and tests can call them directly.

use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audio::{read_ground_truth, read_wav, GroundTruth};
use crate::classifier::{train_ova, MultiClassModel};
use crate::config::PipelineConfig;
use crate::cope::{bank_responses, CopeBank};
use crate::error::{Error, Result};
use crate::eval::{
    det_curve, read_records, roc_curve, score_events, score_thresholds, sliding_detection_with, window_vector, write_records,
    Detection, MetricsReport,
};
use crate::mixer::{execute_plan, MixPlan, MixedFiles};
use crate::peaks::extract_peaks;
use crate::pipeline::{assign_folds, build_bank, Analyzer, LabeledClip};
use crate::sweep::{run_sweep, SweepConfig, SweepParam, SweepTable};

/// One line of a clip manifest `path,label[,fold]`; an empty label marks
/// background.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Option<String>,
    pub fold: Option<usize>,
}

pub fn parse_manifest<R: Read>(source: R, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let with_fold = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["path", "label"] => false,
        ["path", "label", "fold"] => true,
        _ => return Err(Error::parse(1, "expected header `path,label` or `path,label,fold`")),
    };
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != header.len() {
            return Err(Error::parse(line, format!("expected {} fields", header.len())));
        }
        let path = row[0].trim();
        if path.is_empty() {
            return Err(Error::parse(line, "empty path"));
        }
        let label = row[1].trim();
        out.push(ManifestEntry {
            path: base.join(path),
            label: (!label.is_empty()).then(|| label.to_string()),
            fold: if with_fold {
                Some(row[2].trim().parse().map_err(|_| Error::parse(line, "bad fold"))?)
            } else {
                None
            },
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(std::fs::File::open(path)?, path.parent().unwrap_or(Path::new(".")))
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Configures one extractor per labeled manifest entry and saves the bank.
pub fn cmd_configure(manifest: &Path, cfg: &PipelineConfig, out: &Path) -> Result<CopeBank> {
    let entries = read_manifest(manifest)?;
    let analyzer = Analyzer::from_config(cfg)?;
    let mut consts = Vec::new();
    let mut meta = Vec::new();
    for e in entries.iter() {
        let Some(label) = &e.label else {
            return Err(Error::Validation(format!("prototype {} has no label", e.path.display())));
        };
        consts.push(analyzer.constellation(&read_wav(&e.path)?)?);
        meta.push((display_name(&e.path), label.clone()));
    }
    let protos: Vec<_> = meta
        .iter()
        .zip(&consts)
        .map(|((n, l), c)| (n.as_str(), c, l.as_str()))
        .collect();
    let bank = build_bank(&protos, cfg.cope.params())?;
    bank.save(out)?;
    Ok(bank)
}

/// How feature rows are cut from each input clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntervalPolicy {
    /// One row per clip, pooled over all frames.
    Whole,
    /// One row per sliding window of the configured geometry.
    Sliding,
}

/// One row of a feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub source: String,
    pub label: Option<String>,
    pub start_s: f64,
    pub end_s: f64,
    pub values: Vec<f64>,
}

/// Writes CSV `source,label,start_s,end_s,cope_0,...`.
pub fn write_features<W: std::io::Write>(rows: &[FeatureRow], k: usize, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["source".to_string(), "label".into(), "start_s".into(), "end_s".into()];
    header.extend((0..k).map(|i| format!("cope_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.source.clone(),
            r.label.clone().unwrap_or_default(),
            r.start_s.to_string(),
            r.end_s.to_string(),
        ];
        rec.extend(r.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(source: R) -> Result<Vec<FeatureRow>> {
    let mut rd = csv::Reader::from_reader(source);
    let header = rd.headers()?.clone();
    let fixed = ["source", "label", "start_s", "end_s"];
    if header.len() < 4 || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::parse(1, "expected header `source,label,start_s,end_s,cope_0,...`"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::parse(line, "wrong number of fields"));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad number `{}`", &rec[k])))
        };
        let label = rec[1].trim();
        rows.push(FeatureRow {
            source: rec[0].to_string(),
            label: (!label.is_empty()).then(|| label.to_string()),
            start_s: num(2)?,
            end_s: num(3)?,
            values: (4..rec.len()).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

/// Extracts feature rows for every manifest entry with the saved bank.
pub fn cmd_extract(
    manifest: &Path,
    bank: &Path,
    cfg: &PipelineConfig,
    policy: IntervalPolicy,
    out: &Path,
) -> Result<Vec<FeatureRow>> {
    let bank = CopeBank::load(bank)?;
    bank.frontend().check_compatible(&cfg.frontend.frontend()?)?;
    let analyzer = Analyzer::new(*bank.frontend())?;
    let windows = cfg.eval.windows();
    windows.validate()?;
    let mut rows = Vec::new();
    for e in read_manifest(manifest)? {
        let clip = read_wav(&e.path)?;
        let g = analyzer.gammatonegram(&clip)?;
        let c = extract_peaks(&g);
        let responses = bank_responses(&c, &bank)?;
        let intervals: Vec<(f64, f64)> = match policy {
            IntervalPolicy::Whole => {
                let end = (c.frames().saturating_sub(1) as f64 * c.frontend().hop_s()).max(c.frontend().hop_s());
                vec![(0.0, end)]
            }
            IntervalPolicy::Sliding => {
                let n = windows.count(clip.duration_s());
                if n == 0 {
                    log::warn!("{} is shorter than one window", e.path.display());
                }
                (0..n).map(|k| windows.interval(k)).collect()
            }
        };
        for (start_s, end_s) in intervals {
            rows.push(FeatureRow {
                source: display_name(&e.path),
                label: e.label.clone(),
                start_s,
                end_s,
                values: window_vector(&g, &responses, start_s, end_s)?.values,
            });
        }
    }
    write_features(&rows, bank.len(), std::fs::File::create(out)?)?;
    Ok(rows)
}

/// Trains the one-vs-all model on a feature file; unlabeled rows are
/// background negatives.
pub fn cmd_train(features: &Path, cfg: &PipelineConfig, out: &Path) -> Result<MultiClassModel> {
    let rows = read_features(BufReader::new(std::fs::File::open(features)?))?;
    let classes = crate::pipeline::class_list(rows.iter().map(|r| &r.label));
    if classes.is_empty() {
        return Err(Error::Training("feature file has no labeled rows".into()));
    }
    let labels: Vec<Option<usize>> = rows
        .iter()
        .map(|r| r.label.as_ref().and_then(|l| classes.iter().position(|c| c == l)))
        .collect();
    let x: Vec<Vec<f64>> = rows.into_iter().map(|r| r.values).collect();
    let model = train_ova(&x, &labels, &classes, &cfg.svm.options())?;
    model.save(out)?;
    Ok(model)
}

/// Runs windowed detection on a stream and writes the records CSV.
pub fn cmd_detect(stream: &Path, bank: &Path, model: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Detection> {
    let bank = CopeBank::load(bank)?;
    let model = MultiClassModel::load(model)?;
    let analyzer = Analyzer::new(*bank.frontend())?;
    let clip = read_wav(stream)?;
    let clip = analyzer.prepare(&clip)?;
    let det = sliding_detection_with(&clip, analyzer.filterbank(), &bank, &model, cfg.eval.windows())?;
    write_records(&det.records, model.classes(), std::fs::File::create(out)?)?;
    Ok(det)
}

/// Scores records against ground truth; writes `metrics.json`,
/// `metrics.txt`, `det.csv`, `det.svg`, `roc.csv` and `roc.svg`.
pub fn cmd_evaluate(records: &Path, truth: &Path, out_dir: &Path) -> Result<MetricsReport> {
    let (records, classes) = read_records(BufReader::new(std::fs::File::open(records)?))?;
    let truth: GroundTruth = read_ground_truth(truth)?;
    let report = score_events(&records, &truth, &classes)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("metrics.json"), report.to_json() + "\n")?;
    std::fs::write(out_dir.join("metrics.txt"), report.to_string())?;
    let thresholds = score_thresholds(&records);
    let det = det_curve(&records, &truth, &classes, &thresholds)?;
    det.write_csv(std::fs::File::create(out_dir.join("det.csv"))?)?;
    std::fs::write(out_dir.join("det.svg"), det.to_svg())?;
    let roc = roc_curve(&records, &truth, &classes, &thresholds)?;
    roc.write_csv(std::fs::File::create(out_dir.join("roc.csv"))?)?;
    std::fs::write(out_dir.join("roc.svg"), roc.to_svg())?;
    Ok(report)
}

pub fn cmd_mix(plan: &Path, out_dir: &Path) -> Result<Vec<MixedFiles>> {
    execute_plan(&MixPlan::load(plan)?, out_dir)
}

/// Sweeps one parameter over a manifest. Entries without a fold column are
/// assigned stratified folds from the config seed.
pub fn cmd_sweep(
    manifest: &Path,
    parameter: SweepParam,
    values: &[f64],
    folds: usize,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<SweepTable> {
    let entries = read_manifest(manifest)?;
    let data = entries
        .iter()
        .map(|e| {
            Ok(LabeledClip {
                name: display_name(&e.path),
                clip: read_wav(&e.path)?,
                label: e.label.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fold_ids: Vec<usize> = if entries.iter().all(|e| e.fold.is_some()) {
        entries.iter().map(|e| e.fold.expect("checked")).collect()
    } else {
        let labels: Vec<_> = data.iter().map(|d| d.label.clone()).collect();
        assign_folds(&labels, folds, cfg.seed)
    };
    let table = run_sweep(
        &data,
        &fold_ids,
        &SweepConfig {
            parameter,
            values: values.to_vec(),
            base: cfg.clone(),
            folds,
        },
    )?;
    table.write_csv(std::fs::File::create(out)?)?;
    Ok(table)
}

/// COPE sound event detection toolkit.
#[derive(Debug, Parser)]
#[command(name = "cope", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Options shared by every subcommand. Value flags override the
/// corresponding config field.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "COPE_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    /// Gammatone channels.
    #[arg(long, global = true)]
    pub channels: Option<usize>,
    /// Lowest centre frequency (Hz).
    #[arg(long, global = true)]
    pub f_min: Option<f64>,
    /// Highest centre frequency (Hz); defaults to 0.45 of the sample rate.
    #[arg(long, global = true)]
    pub f_max: Option<f64>,
    /// Gammatone filter order.
    #[arg(long, global = true)]
    pub order: Option<u32>,
    /// Expected input sample rate (Hz).
    #[arg(long, global = true)]
    pub sample_rate: Option<u32>,
    /// Frame length in samples; hop is half.
    #[arg(long, global = true)]
    pub frame_size: Option<usize>,
    /// Divide each gammatonegram by its maximum.
    #[arg(long, global = true)]
    pub normalize: Option<bool>,
    /// Peak position tolerance at the reference point (cells).
    #[arg(long, global = true)]
    pub sigma0: Option<f64>,
    /// Relative energy threshold for prototype peaks.
    #[arg(long, global = true)]
    pub t1: Option<f64>,
    /// Extractor support width (ms).
    #[arg(long, global = true)]
    pub support_ms: Option<f64>,
    /// Prototype clips used per class when training from clips.
    #[arg(long, global = true)]
    pub prototypes_per_class: Option<usize>,
    /// SVM regularization.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Detection window length (s).
    #[arg(long, global = true)]
    pub window_s: Option<f64>,
    /// Detection window hop (s).
    #[arg(long, global = true)]
    pub hop_s: Option<f64>,
    /// Seed for fold assignment and random placement.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl GlobalArgs {
    /// Config file (or defaults) with flag overrides applied and validated.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let f = &mut cfg.frontend;
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = self.$src { $dst = v; })*
            };
        }
        set!(channels => f.channels, f_min => f.f_min, order => f.order, sample_rate => f.sample_rate,
             frame_size => f.frame_size, normalize => f.normalize);
        if self.f_max.is_some() {
            f.f_max = self.f_max;
        }
        set!(sigma0 => cfg.cope.sigma0, t1 => cfg.cope.t1, support_ms => cfg.cope.support_ms,
             c => cfg.svm.c, window_s => cfg.eval.window_s, hop_s => cfg.eval.hop_s, seed => cfg.seed);
        if self.prototypes_per_class.is_some() {
            cfg.cope.prototypes_per_class = self.prototypes_per_class;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Configure a bank of extractors from prototype clips.
    Configure {
        /// Manifest CSV `path,label`.
        #[arg(long)]
        prototypes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute COPE feature vectors for clips.
    Extract {
        /// Manifest CSV `path,label`.
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, value_enum, default_value_t = IntervalPolicy::Whole)]
        intervals: IntervalPolicy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the one-vs-all SVM on a feature file.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Slide a window over a stream and classify each window.
    Detect {
        stream: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detection records against ground truth.
    Evaluate {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Mix events onto backgrounds following a plan CSV.
    Mix {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Cross-validated sensitivity sweep of one parameter.
    Sweep {
        /// Manifest CSV `path,label[,fold]`.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_param)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_param(s: &str) -> std::result::Result<SweepParam, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.global.resolve()?;
    if cli.global.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    }
    let Some(command) = cli.command else {
        return Err(Error::Validation("a subcommand is required (see --help)".into()));
    };
    match command {
        Command::Configure { prototypes, out } => {
            let bank = cmd_configure(&prototypes, &cfg, &out)?;
            println!("configured {} extractors -> {}", bank.len(), out.display());
        }
        Command::Extract {
            inputs,
            bank,
            intervals,
            out,
        } => {
            let rows = cmd_extract(&inputs, &bank, &cfg, intervals, &out)?;
            println!("{} feature rows -> {}", rows.len(), out.display());
        }
        Command::Train { features, out } => {
            let model = cmd_train(&features, &cfg, &out)?;
            println!("trained {} class models -> {}", model.classes().len(), out.display());
        }
        Command::Detect {
            stream,
            bank,
            model,
            out,
        } => {
            let det = cmd_detect(&stream, &bank, &model, &cfg, &out)?;
            if let Some(w) = det.warning {
                eprintln!("warning: {w}");
            }
            println!("{} windows -> {}", det.records.len(), out.display());
        }
        Command::Evaluate {
            records,
            truth,
            out_dir,
        } => {
            let report = cmd_evaluate(&records, &truth, &out_dir)?;
            print!("{report}");
        }
        Command::Mix { plan, out_dir } => {
            let files = cmd_mix(&plan, &out_dir)?;
            for f in &files {
                if f.clipped_samples > 0 {
                    eprintln!("warning: {} has {} clipped samples", f.wav.display(), f.clipped_samples);
                }
            }
            println!("{} mixtures -> {}", files.len(), out_dir.display());
        }
        Command::Sweep {
            manifest,
            param,
            values,
            folds,
            out,
        } => {
            let table = cmd_sweep(&manifest, param, &values, folds, &cfg, &out)?;
            println!("{} rows -> {}", table.rows.len(), out.display());
        }
    }
    Ok(())
}
