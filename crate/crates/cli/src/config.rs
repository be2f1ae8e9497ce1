//! Experiment configuration files.
//!
//! TOML with five sections; every key has a default except where noted.
//! The grammar is documented in full in the README.

use std::fmt;
use std::path::{Path, PathBuf};

use m3s_core::data::{SyntheticConfig, Task};
use m3s_core::masking::{Granularity, MissingSpec, RateRange};
use m3s_core::model::{Activation, ModelConfig};
use m3s_core::optim::{AdamConfig, OptimizerKind};
use m3s_core::train::MetaConfig;
use serde::{Deserialize, Serialize};

use crate::error::{config, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub missing: MissingSection,
    #[serde(default)]
    pub run: RunSection,
    /// Directory relative paths resolve against; the config file's own.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Hidden widths of every modality encoder.
    pub encoder_hidden: Vec<usize>,
    pub fusion_hidden: Vec<usize>,
    pub activation: ActivationName,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { encoder_hidden: vec![32], fusion_hidden: vec![32], activation: ActivationName::Relu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: DataSource,
    /// CSV file; required when `source = "csv"`.
    pub path: Option<PathBuf>,
    pub task: TaskName,
    pub classes: Option<usize>,
    pub label_range: [f64; 2],
    pub dims: [usize; 3],
    pub sizes: [usize; 3],
    pub noise: f64,
    pub redundancy: f64,
    pub private_dim: usize,
    pub seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        DataSection {
            source: DataSource::Synthetic,
            path: None,
            task: TaskName::Regression,
            classes: None,
            label_range: [-1.0, 1.0],
            dims: d.dims,
            sizes: d.sizes,
            noise: d.noise,
            redundancy: d.redundancy,
            private_dim: d.private_dim,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Orig,
    SplTrn,
    M3s,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Orig, Method::SplTrn, Method::M3s];

    pub fn key(self) -> &'static str {
        match self {
            Method::Orig => "orig",
            Method::SplTrn => "spl_trn",
            Method::M3s => "m3s",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Orig => "ORIG",
            Method::SplTrn => "ORIG + SPL-TRN",
            Method::M3s => "ORIG + M3S",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GranularityName {
    PerSample,
    PerBatch,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub method: Method,
    /// Inner rate; required whenever M3S runs.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub inner_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerName,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub granularity: GranularityName,
}

impl Default for TrainSection {
    fn default() -> Self {
        let m = MetaConfig::default();
        let a = AdamConfig::default();
        TrainSection {
            method: Method::M3s,
            alpha: None,
            beta: m.beta,
            inner_steps: m.inner_steps,
            batch_size: m.batch_size,
            epochs: m.epochs,
            optimizer: OptimizerName::Adam,
            adam_beta1: a.beta1,
            adam_beta2: a.beta2,
            adam_eps: a.eps,
            granularity: GranularityName::PerSample,
        }
    }
}

/// Rate ranges per modality; `all` fills any modality not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub language: Option<[f64; 2]>,
}

impl RatesSection {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        RatesSection { all: Some([lo, hi]), ..Default::default() }
    }

    pub fn resolve(&self, what: &str) -> Result<MissingSpec> {
        let range = |name: &str, explicit: Option<[f64; 2]>| -> Result<RateRange> {
            let [lo, hi] = explicit
                .or(self.all)
                .ok_or_else(|| config(format!("{what}: no rate range for {name} (set `{name}` or `all`)")))?;
            RateRange::new(lo, hi).map_err(|e| config(format!("{what}.{name}: {e}")))
        };
        Ok(MissingSpec::new(
            range("audio", self.audio)?,
            range("video", self.video)?,
            range("language", self.language)?,
        ))
    }
}

/// `0.4-0.6`, or per modality as `audio 0.2-0.4, video 0.4-0.6, ...`.
impl fmt::Display for RatesSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = [("audio", self.audio), ("video", self.video), ("language", self.language)];
        if let (Some([lo, hi]), true) = (self.all, parts.iter().all(|(_, r)| r.is_none())) {
            return write!(f, "{lo}-{hi}");
        }
        let items: Vec<String> =
            parts.iter().filter_map(|(name, r)| r.or(self.all).map(|[lo, hi]| format!("{name} {lo}-{hi}"))).collect();
        f.write_str(&items.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissingSection {
    pub train: RatesSection,
    pub test: RatesSection,
}

impl Default for MissingSection {
    fn default() -> Self {
        MissingSection { train: RatesSection::uniform(0.4, 0.6), test: RatesSection::uniform(0.4, 0.6) }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub eval_seed: u64,
    pub out: PathBuf,
    pub methods: Vec<Method>,
    /// Missing-rate levels for `sweep`.
    pub levels: Vec<[f64; 2]>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: vec![0, 1, 2, 3, 4],
            eval_seed: 2023,
            out: PathBuf::from("runs"),
            methods: Method::ALL.to_vec(),
            levels: vec![[0.2, 0.4], [0.4, 0.6], [0.6, 0.8]],
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSection::default(),
            data: DataSection::default(),
            train: TrainSection { alpha: Some(MetaConfig::default().alpha), ..TrainSection::default() },
            missing: MissingSection::default(),
            run: RunSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.run.out = base_dir.join(&cfg.run.out);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| match e {
            HarnessError::Config(msg) => config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.task()?;
        self.model_config()?;
        self.missing.train.resolve("missing.train")?;
        self.missing.test.resolve("missing.test")?;
        if self.data.source == DataSource::Csv && self.data.path.is_none() {
            return Err(config("data.path is required when data.source = \"csv\""));
        }
        if self.run.methods.is_empty() {
            return Err(config("run.methods is empty"));
        }
        if self.run.seeds.is_empty() {
            return Err(config("run.seeds is empty"));
        }
        let mut methods = self.run.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.run.methods.len() {
            return Err(config("run.methods lists a method twice"));
        }
        self.meta(0, Method::Orig)?;
        Ok(())
    }

    pub fn task(&self) -> Result<Task> {
        match (self.data.task, self.data.classes) {
            (TaskName::Regression, None) => {
                let [lo, hi] = self.data.label_range;
                Ok(Task::Regression { lo, hi })
            }
            (TaskName::Regression, Some(_)) => Err(config("data.classes only applies to classification")),
            (TaskName::Classification, Some(classes)) if classes >= 2 => Ok(Task::Classification { classes }),
            (TaskName::Classification, _) => Err(config("classification needs data.classes >= 2")),
        }
    }

    /// Model for data with the given feature dims.
    pub fn model_config_for(&self, dims: [usize; 3]) -> Result<ModelConfig> {
        let hidden = self.model.encoder_hidden.clone();
        let cfg = ModelConfig {
            dims,
            encoder_hidden: [hidden.clone(), hidden.clone(), hidden],
            fusion_hidden: self.model.fusion_hidden.clone(),
            head: self.task()?.head(),
            activation: match self.model.activation {
                ActivationName::Relu => Activation::Relu,
                ActivationName::Tanh => Activation::Tanh,
            },
        };
        cfg.validate().map_err(|e| config(format!("model: {e}")))?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        self.model_config_for(self.data.dims)
    }

    pub fn synthetic(&self) -> Result<SyntheticConfig> {
        if self.data.source != DataSource::Synthetic {
            return Err(config("data.source is not \"synthetic\""));
        }
        Ok(SyntheticConfig {
            dims: self.data.dims,
            sizes: self.data.sizes,
            task: self.task()?,
            noise: self.data.noise,
            redundancy: self.data.redundancy,
            private_dim: self.data.private_dim,
            seed: self.data.seed,
        })
    }

    pub fn csv_path(&self) -> Option<PathBuf> {
        self.data.path.as_ref().map(|p| self.base_dir.join(p))
    }

    /// Output directory; relative `run.out` values were resolved against
    /// the config file's directory at load time.
    pub fn out_dir(&self) -> PathBuf {
        self.run.out.clone()
    }

    /// Trainer settings for one run; `alpha` must be set when `method` is M3S.
    pub fn meta(&self, seed: u64, method: Method) -> Result<MetaConfig> {
        let t = &self.train;
        let alpha = match (method, t.alpha) {
            (_, Some(a)) => a,
            (Method::M3s, None) => return Err(config("train.alpha is required for m3s")),
            (_, None) => 0.0,
        };
        let meta = MetaConfig {
            alpha,
            beta: t.beta,
            inner_steps: t.inner_steps,
            batch_size: t.batch_size,
            epochs: t.epochs,
            outer_optimizer: match t.optimizer {
                OptimizerName::Sgd => OptimizerKind::Sgd,
                OptimizerName::Adam => {
                    OptimizerKind::Adam(AdamConfig { beta1: t.adam_beta1, beta2: t.adam_beta2, eps: t.adam_eps })
                }
            },
            granularity: match t.granularity {
                GranularityName::PerSample => Granularity::PerSample,
                GranularityName::PerBatch => Granularity::PerBatch,
            },
            seed,
        };
        meta.validate().map_err(|e| config(format!("train: {e}")))?;
        Ok(meta)
    }
}

/// Parses `lo-hi` (e.g. `0.4-0.6`) or a single fixed rate.
pub fn parse_level(text: &str) -> Result<[f64; 2]> {
    let bad = || config(format!("bad rate level `{text}`; expected `lo-hi`"));
    let (lo, hi) = match text.split_once('-') {
        Some((lo, hi)) => (lo.trim(), hi.trim()),
        None => (text.trim(), text.trim()),
    };
    let (lo, hi) = (lo.parse::<f64>().map_err(|_| bad())?, hi.parse::<f64>().map_err(|_| bad())?);
    RateRange::new(lo, hi).map_err(|e| config(format!("rate level `{text}`: {e}")))?;
    Ok([lo, hi])
}
