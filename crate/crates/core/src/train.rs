//! Training regimes.
//!
//! - ORIG ([`train_orig`]): every training sample keeps one frozen mask for
//!   the whole run.
//! - SPL-TRN ([`train_spl_trn`]): every batch is freshly masked each time it
//!   is visited.
//! - M³S ([`train_m3s`]): two freshly masked batches per iteration; `K`
//!   plain gradient steps on the support batch give `θ*`, then the query
//!   loss gradient taken at `θ*` updates `θ` through the outer optimizer.
//!   The meta-gradient is first order: nothing is differentiated through
//!   the inner steps.
//!
//! All regimes are pure functions of their inputs and seed.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{Dataset, Sample, Split};
use crate::error::{config_err, Error, Result};
use crate::masking::{transform_batch, Granularity, MissingSpec};
use crate::metrics::{classification_report, regression_report, MetricReport};
use crate::model::{Batch, FusionModel, Parameters, Targets};
use crate::optim::{sgd_step, AdamConfig, Optimizer, OptimizerKind};
use crate::rng::{streams, Rng};

/// Something with a differentiable loss over batches of type `B`.
pub trait Objective<B> {
    fn loss_and_grad(&self, params: &Parameters, batch: &B) -> Result<(f64, Parameters)>;
}

impl Objective<Batch> for FusionModel {
    fn loss_and_grad(&self, params: &Parameters, batch: &Batch) -> Result<(f64, Parameters)> {
        FusionModel::loss_and_grad(self, params, batch)
    }
}

/// Inner meta-train loop: `steps` plain SGD steps at rate `alpha`, all on
/// the same support batch. Returns `θ_K`; `params` is left untouched.
pub fn inner_adapt<B, O: Objective<B>>(
    objective: &O,
    params: &Parameters,
    support: &B,
    alpha: f64,
    steps: usize,
) -> Result<Parameters> {
    if steps == 0 {
        return Err(config_err("inner iteration count K must be >= 1"));
    }
    let mut theta = params.clone();
    for _ in 0..steps {
        let (_, grads) = objective.loss_and_grad(&theta, support)?;
        theta = sgd_step(&theta, &grads, alpha)?;
    }
    Ok(theta)
}

/// Outer meta-update: the query-loss gradient evaluated at `adapted` is
/// applied to `params` by `optimizer` at rate `beta`.
///
/// Returns the new parameters and the query loss at `adapted`.
pub fn meta_update<B, O: Objective<B>>(
    objective: &O,
    params: &Parameters,
    adapted: &Parameters,
    query: &B,
    beta: f64,
    optimizer: &mut Optimizer,
) -> Result<(Parameters, f64)> {
    params.check_aligned(adapted)?;
    let (loss, grads) = objective.loss_and_grad(adapted, query)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { op: "query loss" });
    }
    Ok((optimizer.step(params, &grads, beta)?, loss))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    /// Inner learning rate α.
    pub alpha: f64,
    /// Outer learning rate β; also the rate of the single-loop regimes.
    pub beta: f64,
    /// Inner iteration count K.
    pub inner_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub outer_optimizer: OptimizerKind,
    pub granularity: Granularity,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            alpha: 2e-4,
            beta: 1e-3,
            inner_steps: 1,
            batch_size: 32,
            epochs: 60,
            outer_optimizer: OptimizerKind::Adam(AdamConfig::default()),
            granularity: Granularity::PerSample,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(config_err("alpha must be >= 0"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(config_err("beta must be >= 0"));
        }
        if self.inner_steps == 0 {
            return Err(config_err("inner_steps must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(config_err("epochs must be >= 1"));
        }
        Ok(())
    }
}

/// One line of the training curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean loss of the batches that drove parameter updates (for M³S,
    /// the query loss at `θ*`).
    pub train_loss: f64,
    pub valid_loss: f64,
    pub test_loss: f64,
    pub valid_metrics: MetricReport,
    pub test_metrics: MetricReport,
    pub updates: usize,
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Called after every epoch, e.g. to stamp wall-clock time or report progress.
pub trait EpochHook {
    fn on_epoch_end(&mut self, record: &mut EpochRecord);
}

impl EpochHook for () {
    fn on_epoch_end(&mut self, _record: &mut EpochRecord) {}
}

/// Masked validation and test batches every regime is scored on.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalViews {
    pub valid: Batch,
    pub test: Batch,
}

impl EvalViews {
    /// Masks valid/test once from `spec` at `eval_seed`.
    pub fn frozen(dataset: &Dataset, spec: &MissingSpec, eval_seed: u64) -> Result<EvalViews> {
        let frozen = dataset.freeze_masks(spec, eval_seed);
        let valid = frozen.masked_split(Split::Valid)?;
        let test = frozen.masked_split(Split::Test)?;
        if valid.is_empty() || test.is_empty() {
            return Err(config_err("validation and test splits must be non-empty"));
        }
        Ok(EvalViews { valid: Batch::from_samples(&valid)?, test: Batch::from_samples(&test)? })
    }
}

/// Loss and task metrics of `params` on a batch.
pub fn evaluate(model: &FusionModel, params: &Parameters, batch: &Batch) -> Result<(f64, MetricReport)> {
    let preds = model.predict(params, batch)?;
    let loss = model.loss_value(params, batch)?;
    let report = match &batch.targets {
        Targets::Scores(y) => regression_report(preds.data(), y)?,
        Targets::Classes(y) => classification_report(&preds, y, model.config().head.outputs())?,
    };
    Ok((loss, report))
}

/// Supplies masked training batches, one pass per epoch.
pub trait BatchSource {
    fn start_epoch(&mut self);
    fn next_batch(&mut self) -> Result<Option<Batch>>;
}

/// Shuffled pass over training samples that were masked once up front.
#[derive(Debug, Clone)]
pub struct FrozenBatches {
    samples: Vec<Sample>,
    batch_size: usize,
    shuffle: Rng,
    order: Vec<usize>,
    pos: usize,
}

impl FrozenBatches {
    pub fn new(masked: Vec<Sample>, batch_size: usize, seed: u64) -> Self {
        FrozenBatches {
            order: (0..masked.len()).collect(),
            samples: masked,
            batch_size,
            shuffle: Rng::with_stream(seed, streams::SHUFFLE),
            pos: usize::MAX,
        }
    }
}

impl BatchSource for FrozenBatches {
    fn start_epoch(&mut self) {
        self.order = (0..self.samples.len()).collect();
        self.shuffle.shuffle(&mut self.order);
        self.pos = 0;
    }

    fn next_batch(&mut self) -> Result<Option<Batch>> {
        let Some(ids) = take_ids(&self.order, &mut self.pos, self.batch_size) else {
            return Ok(None);
        };
        let picked: Vec<Sample> = ids.iter().map(|&i| self.samples[i].clone()).collect();
        Batch::from_samples(&picked).map(Some)
    }
}

/// Shuffled pass that masks every batch afresh when it is visited.
#[derive(Debug, Clone)]
pub struct FreshMaskBatches<'a> {
    samples: &'a [Sample],
    spec: MissingSpec,
    granularity: Granularity,
    batch_size: usize,
    shuffle: Rng,
    mask: Rng,
    order: Vec<usize>,
    pos: usize,
}

impl<'a> FreshMaskBatches<'a> {
    pub fn new(
        samples: &'a [Sample],
        spec: MissingSpec,
        granularity: Granularity,
        batch_size: usize,
        seed: u64,
    ) -> Self {
        FreshMaskBatches {
            samples,
            spec,
            granularity,
            batch_size,
            shuffle: Rng::with_stream(seed, streams::SHUFFLE),
            mask: Rng::with_stream(seed, streams::MASK),
            order: Vec::new(),
            pos: usize::MAX,
        }
    }
}

impl BatchSource for FreshMaskBatches<'_> {
    fn start_epoch(&mut self) {
        self.order = (0..self.samples.len()).collect();
        self.shuffle.shuffle(&mut self.order);
        self.pos = 0;
    }

    fn next_batch(&mut self) -> Result<Option<Batch>> {
        let Some(ids) = take_ids(&self.order, &mut self.pos, self.batch_size) else {
            return Ok(None);
        };
        let picked: Vec<Sample> = ids.iter().map(|&i| self.samples[i].clone()).collect();
        let masked = transform_batch(&picked, &self.spec, &mut self.mask, self.granularity)?;
        Batch::from_samples(&masked).map(Some)
    }
}

/// Yields every batch of the wrapped source twice in a row.
///
/// Feeding this to the meta-sampling loop makes support and query the same
/// batch, which lines its iterations up one-to-one with a single-loop
/// regime consuming the wrapped source.
#[derive(Debug, Clone)]
pub struct Repeated<S> {
    inner: S,
    pending: Option<Batch>,
}

impl<S> Repeated<S> {
    pub fn new(inner: S) -> Self {
        Repeated { inner, pending: None }
    }
}

impl<S: BatchSource> BatchSource for Repeated<S> {
    fn start_epoch(&mut self) {
        self.pending = None;
        self.inner.start_epoch();
    }

    fn next_batch(&mut self) -> Result<Option<Batch>> {
        if let Some(b) = self.pending.take() {
            return Ok(Some(b));
        }
        let next = self.inner.next_batch()?;
        self.pending = next.clone();
        Ok(next)
    }
}

fn take_ids<'o>(order: &'o [usize], pos: &mut usize, batch_size: usize) -> Option<&'o [usize]> {
    if *pos >= order.len() {
        return None;
    }
    let end = (*pos + batch_size).min(order.len());
    let ids = &order[*pos..end];
    *pos = end;
    Some(ids)
}

fn check_inputs(model: &FusionModel, dataset: &Dataset, meta: &MetaConfig) -> Result<()> {
    meta.validate()?;
    let header = dataset.header();
    if header.dims != model.config().dims {
        return Err(config_err(format!(
            "model dims {:?} do not match dataset dims {:?}",
            model.config().dims,
            header.dims
        )));
    }
    if header.task.head() != model.config().head {
        return Err(config_err("model head does not match the dataset task"));
    }
    if dataset.split(Split::Train).is_empty() {
        return Err(config_err("training split is empty"));
    }
    Ok(())
}

fn epoch_record(
    model: &FusionModel,
    params: &Parameters,
    eval: &EvalViews,
    epoch: usize,
    losses: &[f64],
) -> Result<EpochRecord> {
    let (valid_loss, valid_metrics) = evaluate(model, params, &eval.valid)?;
    let (test_loss, test_metrics) = evaluate(model, params, &eval.test)?;
    Ok(EpochRecord {
        epoch,
        train_loss: losses.iter().sum::<f64>() / losses.len().max(1) as f64,
        valid_loss,
        test_loss,
        valid_metrics,
        test_metrics,
        updates: losses.len(),
        wall_clock_s: None,
    })
}

/// Single-loop training: one outer-optimizer step per batch.
pub fn fit_single_loop<S: BatchSource>(
    model: &FusionModel,
    init: Parameters,
    source: &mut S,
    eval: &EvalViews,
    meta: &MetaConfig,
    hook: &mut dyn EpochHook,
) -> Result<(Parameters, TrainLog)> {
    meta.validate()?;
    let mut theta = init;
    let mut opt = Optimizer::new(meta.outer_optimizer);
    let mut log = TrainLog::default();
    for epoch in 1..=meta.epochs {
        source.start_epoch();
        let mut losses = Vec::new();
        while let Some(batch) = source.next_batch()? {
            let (loss, grads) = model.loss_and_grad(&theta, &batch)?;
            theta = opt.step(&theta, &grads, meta.beta)?;
            losses.push(loss);
        }
        let mut record = epoch_record(model, &theta, eval, epoch, &losses)?;
        hook.on_epoch_end(&mut record);
        log.records.push(record);
    }
    Ok((theta, log))
}

/// Meta-sampling loop: support/query pairs drawn consecutively from the
/// source; a trailing unpaired batch is skipped.
pub fn fit_meta<S: BatchSource>(
    model: &FusionModel,
    init: Parameters,
    source: &mut S,
    eval: &EvalViews,
    meta: &MetaConfig,
    hook: &mut dyn EpochHook,
) -> Result<(Parameters, TrainLog)> {
    meta.validate()?;
    let mut theta = init;
    let mut opt = Optimizer::new(meta.outer_optimizer);
    let mut log = TrainLog::default();
    for epoch in 1..=meta.epochs {
        source.start_epoch();
        let mut losses = Vec::new();
        while let Some(support) = source.next_batch()? {
            let Some(query) = source.next_batch()? else { break };
            let adapted = inner_adapt(model, &theta, &support, meta.alpha, meta.inner_steps)?;
            let (next, query_loss) = meta_update(model, &theta, &adapted, &query, meta.beta, &mut opt)?;
            theta = next;
            losses.push(query_loss);
        }
        if losses.is_empty() {
            return Err(config_err("meta-sampling needs at least two batches per epoch; lower batch_size"));
        }
        let mut record = epoch_record(model, &theta, eval, epoch, &losses)?;
        hook.on_epoch_end(&mut record);
        log.records.push(record);
    }
    Ok((theta, log))
}

/// ORIG: trains on the training masks frozen in `dataset`
/// (see [`Dataset::freeze_masks`]).
pub fn train_orig(
    model: &FusionModel,
    dataset: &Dataset,
    eval: &EvalViews,
    meta: &MetaConfig,
    hook: &mut dyn EpochHook,
) -> Result<(Parameters, TrainLog)> {
    check_inputs(model, dataset, meta)?;
    if dataset.frozen().is_none() {
        return Err(config_err("ORIG training needs frozen masks"));
    }
    let masked = dataset.masked_split(Split::Train)?;
    let mut source = FrozenBatches::new(masked, meta.batch_size, meta.seed);
    fit_single_loop(model, model.init_params(meta.seed), &mut source, eval, meta, hook)
}

/// SPL-TRN: fresh masks from `spec` on every visit, single optimizer loop
/// at rate β.
pub fn train_spl_trn(
    model: &FusionModel,
    dataset: &Dataset,
    eval: &EvalViews,
    spec: &MissingSpec,
    meta: &MetaConfig,
    hook: &mut dyn EpochHook,
) -> Result<(Parameters, TrainLog)> {
    check_inputs(model, dataset, meta)?;
    let mut source =
        FreshMaskBatches::new(dataset.split(Split::Train), *spec, meta.granularity, meta.batch_size, meta.seed);
    fit_single_loop(model, model.init_params(meta.seed), &mut source, eval, meta, hook)
}

/// M³S: meta-sampling training over freshly masked support/query batches.
pub fn train_m3s(
    model: &FusionModel,
    dataset: &Dataset,
    eval: &EvalViews,
    spec: &MissingSpec,
    meta: &MetaConfig,
    hook: &mut dyn EpochHook,
) -> Result<(Parameters, TrainLog)> {
    check_inputs(model, dataset, meta)?;
    let mut source =
        FreshMaskBatches::new(dataset.split(Split::Train), *spec, meta.granularity, meta.batch_size, meta.seed);
    fit_meta(model, model.init_params(meta.seed), &mut source, eval, meta, hook)
}
