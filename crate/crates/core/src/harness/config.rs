use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detectors::{default_roster, DetectorConfig};
use crate::error::{Error, Result};
use crate::evaluation::Pooling;
use crate::io::DataFormat;
use crate::prep::{DEFAULT_SUBSAMPLE_FACTOR, DEFAULT_SUBSAMPLE_THRESHOLD};
use crate::rng::RngSeed;
use crate::surrogate::{catalog_order, InapplicablePolicy, CATALOG};

pub const CONFIG_SCHEMA: u32 = 1;

/// Injection metrics aggregated by default.
pub const DEFAULT_METRICS: [&str; 5] = ["scale", "noise", "cutoff", "contextual", "speedup"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggMethod {
    Borda,
    Partial,
    Trimmed,
    Mim,
    Robust,
    Kemeny,
}

impl AggMethod {
    pub const ALL: [AggMethod; 6] = [
        AggMethod::Borda,
        AggMethod::Partial,
        AggMethod::Trimmed,
        AggMethod::Mim,
        AggMethod::Robust,
        AggMethod::Kemeny,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AggMethod::Borda => "borda",
            AggMethod::Partial => "partial",
            AggMethod::Trimmed => "trimmed",
            AggMethod::Mim => "mim",
            AggMethod::Robust => "robust",
            AggMethod::Kemeny => "kemeny",
        }
    }
}

impl FromStr for AggMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AggMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown aggregation method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One model per dataset.
    #[default]
    Dataset,
    /// One model per evaluation series.
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub threshold: usize,
    pub factor: usize,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig {
            threshold: DEFAULT_SUBSAMPLE_THRESHOLD,
            factor: DEFAULT_SUBSAMPLE_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    /// Dataset file or directory; relative paths resolve against the config file.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: DataFormat,
    /// Built-in detectors; the default roster when absent.
    #[serde(default)]
    pub builtin: Option<Vec<DetectorConfig>>,
    /// Directories of `<model_id>__<series_id>.csv` score files.
    #[serde(default)]
    pub external: Vec<PathBuf>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    /// Use all catalog metrics instead of `metrics`.
    #[serde(default)]
    pub all_metrics: bool,
    #[serde(default = "default_methods")]
    pub methods: Vec<AggMethod>,
    /// Top-k cut for partial and robust Borda; `ceil(N / 2)` when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_copies")]
    pub copies: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_fraction")]
    pub selection_fraction: f64,
    #[serde(default)]
    pub seed: RngSeed,
    #[serde(default)]
    pub granularity: Granularity,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default)]
    pub inapplicable: InapplicablePolicy,
    #[serde(default)]
    pub subsample: SubsampleConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_format() -> DataFormat {
    DataFormat::Csv
}
fn default_metrics() -> Vec<String> {
    DEFAULT_METRICS.iter().map(|s| s.to_string()).collect()
}
fn default_methods() -> Vec<AggMethod> {
    AggMethod::ALL.to_vec()
}
fn default_copies() -> usize {
    5
}
fn default_repetitions() -> usize {
    5
}
fn default_fraction() -> f64 {
    0.2
}
fn default_alpha() -> f64 {
    0.05
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: CONFIG_SCHEMA,
            dataset: None,
            format: default_format(),
            builtin: None,
            external: Vec::new(),
            metrics: default_metrics(),
            all_metrics: false,
            methods: default_methods(),
            k: None,
            copies: default_copies(),
            repetitions: default_repetitions(),
            selection_fraction: default_fraction(),
            seed: RngSeed(0),
            granularity: Granularity::Dataset,
            pooling: Pooling::PerSeries,
            inapplicable: InapplicablePolicy::RankLast,
            subsample: SubsampleConfig::default(),
            alpha: default_alpha(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file and resolves relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = &cfg.dataset {
            if d.is_relative() {
                cfg.dataset = Some(base.join(d));
            }
        }
        cfg.external = cfg
            .external
            .iter()
            .map(|p| {
                if p.is_relative() {
                    base.join(p)
                } else {
                    p.clone()
                }
            })
            .collect();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if self.metric_ids()?.is_empty() {
            return Err(Error::Config("metric subset is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.copies == 0 {
            return Err(Error::Config("copies must be >= 1".into()));
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction < 1.0) {
            return Err(Error::Config(format!(
                "selection_fraction must lie in (0,1), got {}",
                self.selection_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no aggregation method selected".into()));
        }
        for d in self.roster() {
            d.validate()?;
        }
        Ok(())
    }

    /// Metrics to aggregate, in catalog order.
    pub fn metric_ids(&self) -> Result<Vec<String>> {
        if self.all_metrics {
            return Ok(CATALOG.iter().map(|m| m.id.to_string()).collect());
        }
        catalog_order(&self.metrics).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn roster(&self) -> Vec<DetectorConfig> {
        self.builtin.clone().unwrap_or_else(default_roster)
    }
}
