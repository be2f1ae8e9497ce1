//! Augmented missing-modality transform.
//!
//! For each modality `m` a missing rate `r_m` is drawn uniformly from that
//! modality's range, `k_m = ⌊T_m · r_m⌋` consecutive feature positions are
//! chosen with a start drawn uniformly from `{0, …, T_m − k_m}`, and those
//! positions are replaced by zeros.
//!
//! RNG consumption is part of the reproducibility contract: every sample
//! (or batch, with [`Granularity::PerBatch`]) takes three rate draws, then
//! one start draw per modality whose span is neither empty nor the whole
//! vector. Empty and full spans consume nothing.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{Modality, Sample};
use crate::error::{config_err, Error, Result};
use crate::num::floor_count;
use crate::rng::Rng;

/// Closed interval of missing rates `[lo, hi] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRange {
    lo: f64,
    hi: f64,
}

impl RateRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(config_err(format!("missing-rate range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")));
        }
        Ok(RateRange { lo, hi })
    }

    pub const ZERO: RateRange = RateRange { lo: 0.0, hi: 0.0 };

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, r: f64) -> bool {
        self.lo <= r && r <= self.hi
    }
}

/// Per-modality rate ranges: the sampling distribution of the transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingSpec {
    pub ranges: [RateRange; 3],
}

impl MissingSpec {
    pub fn new(audio: RateRange, video: RateRange, language: RateRange) -> Self {
        MissingSpec { ranges: [audio, video, language] }
    }

    /// The same range for every modality.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let r = RateRange::new(lo, hi)?;
        Ok(MissingSpec { ranges: [r; 3] })
    }

    pub fn zero() -> Self {
        MissingSpec { ranges: [RateRange::ZERO; 3] }
    }

    pub fn range(&self, m: Modality) -> RateRange {
        self.ranges[m.index()]
    }

    pub fn is_zero(&self) -> bool {
        self.ranges.iter().all(|r| r.hi == 0.0)
    }
}

/// A contiguous zero span `[start, start + len)` inside a vector of `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaskSpan {
    pub start: usize,
    pub len: usize,
    pub dim: usize,
}

impl MaskSpan {
    pub fn noop(dim: usize) -> Self {
        MaskSpan { start: 0, len: 0, dim }
    }

    pub fn is_noop(&self) -> bool {
        self.len == 0
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Realized rates and spans for the three modalities of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskPlan {
    pub rates: [f64; 3],
    pub spans: [MaskSpan; 3],
}

impl MaskPlan {
    pub fn noop(dims: [usize; 3]) -> Self {
        MaskPlan { rates: [0.0; 3], spans: dims.map(MaskSpan::noop) }
    }
}

/// Whether masks are drawn once per sample or shared by a whole batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    #[default]
    PerSample,
    PerBatch,
}

/// One independent uniform draw per modality from its range.
pub fn sample_rates(spec: &MissingSpec, rng: &mut Rng) -> [f64; 3] {
    spec.ranges.map(|r| rng.uniform(r.lo, r.hi))
}

/// Span of `⌊dim · rate⌋` positions at a uniformly drawn start.
///
/// # Panics
/// If `dim == 0` or `rate` is outside `[0, 1]`.
pub fn plan_mask(dim: usize, rate: f64, rng: &mut Rng) -> MaskSpan {
    assert!(dim >= 1, "feature dimension must be >= 1");
    assert!((0.0..=1.0).contains(&rate), "missing rate {rate} outside [0, 1]");
    let len = floor_count(dim, rate);
    let start = if len == 0 || len == dim { 0 } else { rng.index_inclusive(dim - len) };
    MaskSpan { start, len, dim }
}

/// Copy of `features` with the span zeroed.
pub fn apply_mask(features: &[f64], span: &MaskSpan) -> Result<Vec<f64>> {
    if features.len() != span.dim {
        return Err(Error::LengthMismatch { expected: span.dim, found: features.len() });
    }
    let mut out = features.to_vec();
    out[span.start..span.end()].fill(0.0);
    Ok(out)
}

/// Draws rates and spans for one sample with feature dims `dims`.
pub fn plan_sample(dims: [usize; 3], spec: &MissingSpec, rng: &mut Rng) -> MaskPlan {
    let rates = sample_rates(spec, rng);
    let spans =
        [plan_mask(dims[0], rates[0], rng), plan_mask(dims[1], rates[1], rng), plan_mask(dims[2], rates[2], rng)];
    MaskPlan { rates, spans }
}

/// Masked copy of a sample; the label is untouched.
pub fn apply_plan(sample: &Sample, plan: &MaskPlan) -> Result<Sample> {
    let [a, v, l] = Modality::ALL.map(|m| apply_mask(&sample.features[m.index()], &plan.spans[m.index()]));
    Ok(Sample { features: [a?, v?, l?], label: sample.label })
}

/// `T(X; F)` over a batch.
pub fn transform_batch(
    samples: &[Sample],
    spec: &MissingSpec,
    rng: &mut Rng,
    granularity: Granularity,
) -> Result<Vec<Sample>> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let dims = first.dims();
    match granularity {
        Granularity::PerSample => samples.iter().map(|s| apply_plan(s, &plan_sample(s.dims(), spec, rng))).collect(),
        Granularity::PerBatch => {
            let plan = plan_sample(dims, spec, rng);
            samples.iter().map(|s| apply_plan(s, &plan)).collect()
        }
    }
}
