//! Multimodal samples, datasets with train/valid/test splits, frozen masks
//! and a synthetic latent-factor generator.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{config_err, Error, Result};
use crate::masking::{apply_plan, plan_sample, MaskPlan, MissingSpec};
use crate::model::Head;
use crate::num::floor_count;
use crate::rng::{streams, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Audio,
    Video,
    Language,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Video, Modality::Language];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Video => "video",
            Modality::Language => "language",
        }
    }

    /// Column prefix used in dataset files (`a_0`, `v_3`, ...).
    pub fn prefix(self) -> char {
        match self {
            Modality::Audio => 'a',
            Modality::Video => 'v',
            Modality::Language => 'l',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Score(f64),
    Class(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Audio, video and language feature vectors.
    pub features: [Vec<f64>; 3],
    pub label: Label,
}

impl Sample {
    pub fn dims(&self) -> [usize; 3] {
        [self.features[0].len(), self.features[1].len(), self.features[2].len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    /// Scores in `[lo, hi]`, e.g. `[-1, 1]` or `[-3, 3]`.
    Regression {
        lo: f64,
        hi: f64,
    },
    Classification {
        classes: usize,
    },
}

impl Task {
    pub fn head(self) -> Head {
        match self {
            Task::Regression { .. } => Head::Regression,
            Task::Classification { classes } => Head::Classification { classes },
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Task::Regression { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(config_err(format!("label range [{lo}, {hi}] is empty")))
            }
            Task::Classification { classes } if classes < 2 => {
                Err(config_err("classification needs at least 2 classes"))
            }
            _ => Ok(()),
        }
    }

    fn check_label(self, label: Label) -> Result<()> {
        match (self, label) {
            (Task::Regression { lo, hi }, Label::Score(y)) => {
                if y.is_finite() && lo <= y && y <= hi {
                    Ok(())
                } else {
                    Err(config_err(format!("label {y} outside [{lo}, {hi}]")))
                }
            }
            (Task::Classification { classes }, Label::Class(c)) => {
                if c < classes {
                    Ok(())
                } else {
                    Err(Error::LabelOutOfRange { label: c, classes })
                }
            }
            _ => Err(config_err("label kind does not match the task")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub dims: [usize; 3],
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// One mask plan per sample of every split, drawn once.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenMasks {
    pub spec: MissingSpec,
    pub seed: u64,
    pub train: Vec<MaskPlan>,
    pub valid: Vec<MaskPlan>,
    pub test: Vec<MaskPlan>,
}

impl FrozenMasks {
    pub fn split(&self, split: Split) -> &[MaskPlan] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    header: Header,
    train: Vec<Sample>,
    valid: Vec<Sample>,
    test: Vec<Sample>,
    frozen: Option<FrozenMasks>,
}

impl Dataset {
    /// Validates dimensions, finiteness and labels of every sample.
    pub fn new(header: Header, train: Vec<Sample>, valid: Vec<Sample>, test: Vec<Sample>) -> Result<Self> {
        header.task.validate()?;
        if header.dims.contains(&0) {
            return Err(config_err("feature dimensions must be >= 1"));
        }
        for s in train.iter().chain(&valid).chain(&test) {
            if s.dims() != header.dims {
                return Err(config_err(format!("sample dims {:?} differ from header {:?}", s.dims(), header.dims)));
            }
            if s.features.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { op: "dataset" });
            }
            header.task.check_label(s.label)?;
        }
        Ok(Dataset { header, train, valid, test, frozen: None })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.valid.len(), self.test.len()]
    }

    pub fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frozen(&self) -> Option<&FrozenMasks> {
        self.frozen.as_ref()
    }

    /// Draws and stores one mask plan per sample of every split.
    pub fn freeze_masks(&self, spec: &MissingSpec, seed: u64) -> Dataset {
        let mut rng = Rng::with_stream(seed, streams::FREEZE);
        let mut freeze = |samples: &[Sample]| -> Vec<MaskPlan> {
            samples.iter().map(|_| plan_sample(self.header.dims, spec, &mut rng)).collect()
        };
        let train = freeze(&self.train);
        let valid = freeze(&self.valid);
        let test = freeze(&self.test);
        Dataset { frozen: Some(FrozenMasks { spec: *spec, seed, train, valid, test }), ..self.clone() }
    }

    /// The split with its frozen masks applied (unmasked when none are frozen).
    pub fn masked_split(&self, split: Split) -> Result<Vec<Sample>> {
        let samples = self.split(split);
        match &self.frozen {
            None => Ok(samples.to_vec()),
            Some(f) => samples.iter().zip(f.split(split)).map(|(s, p)| apply_plan(s, p)).collect(),
        }
    }
}

/// Shuffled deterministic partition into `(train, valid, test)`.
///
/// Valid and test receive `⌊n · ratio⌋` samples; the remainder goes to train.
pub fn split_samples(samples: Vec<Sample>, header: Header, ratios: [f64; 3], seed: u64) -> Result<Dataset> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(config_err("split ratios must be non-negative"));
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(config_err("split ratios must sum to 1"));
    }
    let n = samples.len();
    let n_valid = floor_count(n, ratios[1]);
    let n_test = floor_count(n, ratios[2]);
    let n_train = n - n_valid - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    Rng::with_stream(seed, streams::SPLIT).shuffle(&mut order);
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    let mut take =
        |ids: &[usize]| -> Vec<Sample> { ids.iter().map(|&i| slots[i].take().expect("index used once")).collect() };
    let train = take(&order[..n_train]);
    let valid = take(&order[n_train..n_train + n_valid]);
    let test = take(&order[n_train + n_valid..]);
    Dataset::new(header, train, valid, test)
}

/// Parameters of the synthetic latent-factor generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub dims: [usize; 3],
    /// Samples per split: train, valid, test.
    pub sizes: [usize; 3],
    pub task: Task,
    /// Standard deviation of per-feature Gaussian noise.
    pub noise: f64,
    /// Cross-modality redundancy in `[0, 1]`; private factors are scaled by `1 − ρ`.
    pub redundancy: f64,
    /// Width of each modality's private latent factor.
    pub private_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            dims: [20, 20, 30],
            sizes: [1368, 456, 457],
            task: Task::Regression { lo: -1.0, hi: 1.0 },
            noise: 0.1,
            redundancy: 0.8,
            private_dim: 4,
            seed: 0,
        }
    }
}

/// Every sample has a latent sentiment `z`; modality `m` observes
/// `a_m·z + (1 − ρ)·B_m·u_m + σ·ε` with fixed random loadings `a_m`,
/// `B_m`, a private factor `u_m ~ N(0, I)` and noise `ε ~ N(0, I)`.
///
/// Regression labels are `z ~ U(lo, hi)`; classification labels quantize
/// `z ~ U(-1, 1)` into equal-width bins.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.task.validate()?;
    if cfg.sizes.contains(&0) {
        return Err(config_err("every split needs at least one sample"));
    }
    if cfg.dims.contains(&0) {
        return Err(config_err("feature dimensions must be >= 1"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(config_err("noise must be >= 0"));
    }
    if !(0.0..=1.0).contains(&cfg.redundancy) {
        return Err(config_err("redundancy must lie in [0, 1]"));
    }

    let mut rng = Rng::with_stream(cfg.seed, streams::DATA);
    let loadings: Vec<Vec<f64>> = cfg.dims.iter().map(|&d| (0..d).map(|_| rng.normal()).collect()).collect();
    let pscale = 1.0 / libm::sqrt(cfg.private_dim.max(1) as f64);
    let private_maps: Vec<Vec<f64>> =
        cfg.dims.iter().map(|&d| (0..d * cfg.private_dim).map(|_| rng.normal() * pscale).collect()).collect();
    let private_weight = 1.0 - cfg.redundancy;

    let draw = |rng: &mut Rng| -> Sample {
        let (z, label) = match cfg.task {
            Task::Regression { lo, hi } => {
                let z = rng.uniform(lo, hi);
                (z, Label::Score(z.clamp(lo, hi)))
            }
            Task::Classification { classes } => {
                let z = rng.uniform(-1.0, 1.0);
                let bin = libm::floor((z + 1.0) / 2.0 * classes as f64) as usize;
                (z, Label::Class(bin.min(classes - 1)))
            }
        };
        let features = [0, 1, 2].map(|m| {
            let u: Vec<f64> = (0..cfg.private_dim).map(|_| rng.normal()).collect();
            (0..cfg.dims[m])
                .map(|j| {
                    let private: f64 = private_maps[m][j * cfg.private_dim..(j + 1) * cfg.private_dim]
                        .iter()
                        .zip(&u)
                        .map(|(b, x)| b * x)
                        .sum();
                    let eps = if cfg.noise > 0.0 { cfg.noise * rng.normal() } else { 0.0 };
                    loadings[m][j] * z + private_weight * private + eps
                })
                .collect()
        });
        Sample { features, label }
    };

    let mut splits = cfg.sizes.map(|n| (0..n).map(|_| draw(&mut rng)).collect::<Vec<_>>());
    let header = Header { dims: cfg.dims, task: cfg.task };
    let [train, valid, test] = core::mem::take(&mut splits);
    Dataset::new(header, train, valid, test)
}
