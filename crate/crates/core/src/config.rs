//! One schema for every tunable of the pipeline, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::SvmOptions;
use crate::cope::CopeParams;
use crate::error::{Error, Result};
use crate::eval::WindowParams;
use crate::gammatone::{FilterbankSpec, FrontEnd, B_MIN, Q_EAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub channels: usize,
    pub f_min: f64,
    /// Defaults to 0.45 times the sample rate.
    pub f_max: Option<f64>,
    pub order: u32,
    pub q_ear: f64,
    pub b_min: f64,
    pub p: f64,
    pub sample_rate: u32,
    pub ir_truncation_db: f64,
    pub frame_size: usize,
    pub normalize: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        let spec = FilterbankSpec::default();
        Self {
            channels: spec.num_channels,
            f_min: spec.f_min,
            f_max: None,
            order: spec.order,
            q_ear: Q_EAR,
            b_min: B_MIN,
            p: spec.p,
            sample_rate: spec.sample_rate,
            ir_truncation_db: spec.ir_truncation_db,
            frame_size: 1024,
            normalize: true,
        }
    }
}

impl FrontendConfig {
    pub fn frontend(&self) -> Result<FrontEnd> {
        let base = FilterbankSpec::with_rate(self.sample_rate);
        let fe = FrontEnd {
            filterbank: FilterbankSpec {
                num_channels: self.channels,
                f_min: self.f_min,
                f_max: self.f_max.unwrap_or(base.f_max),
                order: self.order,
                q_ear: self.q_ear,
                b_min: self.b_min,
                p: self.p,
                sample_rate: self.sample_rate,
                ir_truncation_db: self.ir_truncation_db,
            },
            frame_size: self.frame_size,
            normalize: self.normalize,
        };
        fe.filterbank.validate()?;
        fe.validate()?;
        Ok(fe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CopeConfig {
    pub sigma0: f64,
    pub t1: f64,
    pub support_ms: f64,
    /// Prototypes taken per class from the training clips; all when unset.
    pub prototypes_per_class: Option<usize>,
}

impl Default for CopeConfig {
    fn default() -> Self {
        let p = CopeParams::default();
        Self {
            sigma0: p.sigma0,
            t1: p.t1,
            support_ms: p.support_ms,
            prototypes_per_class: None,
        }
    }
}

impl CopeConfig {
    pub fn params(&self) -> CopeParams {
        CopeParams {
            sigma0: self.sigma0,
            t1: self.t1,
            support_ms: self.support_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let o = SvmOptions::default();
        Self {
            c: o.c,
            tolerance: o.tolerance,
            max_iterations: o.max_iterations,
        }
    }
}

impl SvmConfig {
    pub fn options(&self) -> SvmOptions {
        SvmOptions {
            c: self.c,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let w = WindowParams::default();
        Self {
            window_s: w.window_s,
            hop_s: w.hop_s,
        }
    }
}

impl EvalConfig {
    pub fn windows(&self) -> WindowParams {
        WindowParams {
            window_s: self.window_s,
            hop_s: self.hop_s,
        }
    }
}

/// Complete pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub frontend: FrontendConfig,
    pub cope: CopeConfig,
    pub svm: SvmConfig,
    pub eval: EvalConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frontend: FrontendConfig::default(),
            cope: CopeConfig::default(),
            svm: SvmConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.frontend.frontend()?;
        self.cope.params().validate()?;
        if self.cope.prototypes_per_class == Some(0) {
            return Err(Error::Validation("prototypes_per_class must be positive".into()));
        }
        self.svm.options().validate()?;
        self.eval.windows().validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}
