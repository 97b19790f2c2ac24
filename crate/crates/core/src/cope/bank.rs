use std::io::{BufRead, Write};
use std::path::Path;

use super::{CopeExtractor, CopeParams, Tuple};
use crate::error::{Error, Result};
use crate::gammatone::{FilterbankSpec, FrontEnd};

const HEADER: &str = "cope-bank v1";

/// Ordered set of extractors sharing one front-end and parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct CopeBank {
    extractors: Vec<CopeExtractor>,
}

impl CopeBank {
    pub fn new(extractors: Vec<CopeExtractor>) -> Result<Self> {
        let first = extractors
            .first()
            .ok_or_else(|| Error::Validation("extractor bank is empty".into()))?;
        for (k, ex) in extractors.iter().enumerate() {
            if ex.frontend != first.frontend {
                return Err(Error::Validation(format!("extractor {k} uses a different front-end")));
            }
            if ex.params != first.params {
                return Err(Error::Validation(format!("extractor {k} uses different parameters")));
            }
        }
        Ok(Self { extractors })
    }

    pub fn extractors(&self) -> &[CopeExtractor] {
        &self.extractors
    }

    pub fn len(&self) -> usize {
        self.extractors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extractors.is_empty()
    }

    pub fn frontend(&self) -> &FrontEnd {
        &self.extractors[0].frontend
    }

    pub fn params(&self) -> &CopeParams {
        &self.extractors[0].params
    }

    pub fn with_sigma0(&self, sigma0: f64) -> Result<Self> {
        Self::new(
            self.extractors
                .iter()
                .map(|e| e.with_sigma0(sigma0))
                .collect::<Result<_>>()?,
        )
    }

    /// Writes the versioned text form:
    ///
    /// ```text
    /// cope-bank v1
    /// frontend channels=.. f_min=.. f_max=.. order=.. q_ear=.. b_min=.. p=.. sample_rate=.. ir_truncation_db=.. frame_size=.. normalize=..
    /// params sigma0=.. t1=.. support_ms=..
    /// extractors <K>
    /// extractor <L> <label>
    /// <dt>,<channel>,<energy>      (L lines)
    /// ...
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let fe = self.frontend();
        let fb = &fe.filterbank;
        let p = self.params();
        writeln!(w, "{HEADER}")?;
        writeln!(
            w,
            "frontend channels={} f_min={} f_max={} order={} q_ear={} b_min={} p={} sample_rate={} ir_truncation_db={} frame_size={} normalize={}",
            fb.num_channels,
            fb.f_min,
            fb.f_max,
            fb.order,
            fb.q_ear,
            fb.b_min,
            fb.p,
            fb.sample_rate,
            fb.ir_truncation_db,
            fe.frame_size,
            fe.normalize
        )?;
        writeln!(w, "params sigma0={} t1={} support_ms={}", p.sigma0, p.t1, p.support_ms)?;
        writeln!(w, "extractors {}", self.len())?;
        for ex in &self.extractors {
            writeln!(w, "extractor {} {}", ex.tuples.len(), ex.label)?;
            for t in &ex.tuples {
                writeln!(w, "{},{},{}", t.dt, t.channel, t.energy)?;
            }
        }
        Ok(())
    }

    pub fn parse_text<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Format(format!("bank file ends before {what}"))),
            }
        };

        let (n, l) = next("header")?;
        if l.trim() != HEADER {
            return Err(Error::parse(n, format!("expected `{HEADER}`")));
        }
        let (n, l) = next("frontend line")?;
        let fe = Fields::parse(n, &l, "frontend")?;
        let frontend = FrontEnd {
            filterbank: FilterbankSpec {
                num_channels: fe.get("channels")?,
                f_min: fe.get("f_min")?,
                f_max: fe.get("f_max")?,
                order: fe.get("order")?,
                q_ear: fe.get("q_ear")?,
                b_min: fe.get("b_min")?,
                p: fe.get("p")?,
                sample_rate: fe.get("sample_rate")?,
                ir_truncation_db: fe.get("ir_truncation_db")?,
            },
            frame_size: fe.get("frame_size")?,
            normalize: fe.get("normalize")?,
        };
        frontend.validate()?;
        let (n, l) = next("params line")?;
        let pf = Fields::parse(n, &l, "params")?;
        let params = CopeParams {
            sigma0: pf.get("sigma0")?,
            t1: pf.get("t1")?,
            support_ms: pf.get("support_ms")?,
        };
        let (n, l) = next("extractor count")?;
        let count: usize = l
            .strip_prefix("extractors ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::parse(n, "expected `extractors <count>`"))?;

        let mut extractors = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, l) = next("extractor header")?;
            let rest = l
                .strip_prefix("extractor ")
                .ok_or_else(|| Error::parse(n, "expected `extractor <tuples> <label>`"))?;
            let (len, label) = rest
                .split_once(' ')
                .ok_or_else(|| Error::parse(n, "missing extractor label"))?;
            let len: usize = len
                .parse()
                .map_err(|_| Error::parse(n, "bad tuple count"))?;
            let mut tuples = Vec::with_capacity(len);
            for _ in 0..len {
                let (n, l) = next("tuple")?;
                let parts: Vec<&str> = l.trim().split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::parse(n, "expected `dt,channel,energy`"));
                }
                let bad = |what: &str| Error::parse(n, format!("bad {what}"));
                tuples.push(Tuple {
                    dt: parts[0].parse().map_err(|_| bad("dt"))?,
                    channel: parts[1].parse().map_err(|_| bad("channel"))?,
                    energy: parts[2].parse().map_err(|_| bad("energy"))?,
                });
            }
            extractors.push(
                CopeExtractor::new(tuples, params, label, frontend)
                    .map_err(|e| Error::parse(n, e.to_string()))?,
            );
        }
        if let Ok((n, l)) = next("end") {
            if !l.trim().is_empty() {
                return Err(Error::parse(n, "trailing content after last extractor"));
            }
        }
        Self::new(extractors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// `key=value` pairs after a leading keyword.
struct Fields {
    line: usize,
    pairs: Vec<(String, String)>,
}

impl Fields {
    fn parse(line: usize, text: &str, keyword: &str) -> Result<Self> {
        let mut words = text.split_whitespace();
        if words.next() != Some(keyword) {
            return Err(Error::parse(line, format!("expected `{keyword}` line")));
        }
        let pairs = words
            .map(|w| {
                w.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::parse(line, format!("expected key=value, got `{w}`")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { line, pairs })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::parse(self.line, format!("missing `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::parse(self.line, format!("bad value for `{key}`: {raw}")))
    }
}
