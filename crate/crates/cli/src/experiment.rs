//! Running training regimes over seeds and writing their outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use m3s_core::data::{generate_synthetic, Dataset};
use m3s_core::masking::MissingSpec;
use m3s_core::model::{Batch, FusionModel, Parameters, Targets};
use m3s_core::train::{train_m3s, train_orig, train_spl_trn, EpochHook, EpochRecord, EvalViews, MetaConfig, TrainLog};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, ExperimentConfig, Method, RatesSection};
use crate::dataset_io::load_csv;
use crate::error::{config, HarnessError, Result};
use crate::output::write_atomic;
use crate::report::{curve_csv, metric_map, summarize, ResultsReport, SeedResult};

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match cfg.data.source {
        DataSource::Synthetic => Ok(generate_synthetic(&cfg.synthetic()?)?),
        DataSource::Csv => {
            let path = cfg.csv_path().ok_or_else(|| config("data.path is required"))?;
            load_csv(&path, cfg.task()?)
        }
    }
}

/// SHA-256 over the bit patterns of a batch's features and targets.
pub fn hash_batch(hasher: &mut Sha256, batch: &Batch) {
    for t in &batch.features {
        for d in t.shape() {
            hasher.update((*d as u64).to_le_bytes());
        }
        for v in t.data() {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    match &batch.targets {
        Targets::Scores(ys) => ys.iter().for_each(|y| hasher.update(y.to_bits().to_le_bytes())),
        Targets::Classes(cs) => cs.iter().for_each(|c| hasher.update((*c as u64).to_le_bytes())),
    }
}

pub fn eval_view_hash(eval: &EvalViews) -> String {
    let mut h = Sha256::new();
    hash_batch(&mut h, &eval.valid);
    hash_batch(&mut h, &eval.test);
    hex::encode(h.finalize())
}

/// Stamps each epoch with its wall-clock duration and optionally reports it.
pub struct Timer {
    started: Instant,
    label: Option<String>,
}

impl Timer {
    pub fn new(label: Option<String>) -> Self {
        Timer { started: Instant::now(), label }
    }
}

impl EpochHook for Timer {
    fn on_epoch_end(&mut self, record: &mut EpochRecord) {
        let secs = self.started.elapsed().as_secs_f64();
        self.started = Instant::now();
        record.wall_clock_s = Some(secs);
        if let Some(label) = &self.label {
            eprintln!(
                "{label} epoch {:>3}  train {:.5}  valid {:.5}  test {:.5}  ({secs:.2}s)",
                record.epoch, record.train_loss, record.valid_loss, record.test_loss
            );
        }
    }
}

/// One training run under `method`, scored on `eval`.
pub fn train_method(
    model: &FusionModel,
    dataset: &Dataset,
    eval: &EvalViews,
    method: Method,
    train_spec: &MissingSpec,
    meta: &MetaConfig,
    hook: &mut dyn EpochHook,
) -> Result<(Parameters, TrainLog)> {
    let out = match method {
        // each seed freezes its own training masks
        Method::Orig => train_orig(model, &dataset.freeze_masks(train_spec, meta.seed), eval, meta, hook)?,
        Method::SplTrn => train_spl_trn(model, dataset, eval, train_spec, meta, hook)?,
        Method::M3s => train_m3s(model, dataset, eval, train_spec, meta, hook)?,
    };
    Ok(out)
}

/// A set of methods run over a seed list on one pair of missing specs.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub protocol: String,
    pub tag: Option<String>,
    pub train_rates: RatesSection,
    pub test_rates: RatesSection,
}

pub struct RunArtifacts {
    pub method: Method,
    pub seed: u64,
    pub params: Parameters,
    pub log: TrainLog,
}

pub fn run_comparison(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    cmp: &Comparison,
) -> Result<(ResultsReport, Vec<RunArtifacts>)> {
    let train_spec = cmp.train_rates.resolve("missing.train")?;
    let test_spec = cmp.test_rates.resolve("missing.test")?;
    let model = FusionModel::new(cfg.model_config_for(dataset.header().dims)?)?;
    for &m in &cfg.run.methods {
        cfg.meta(0, m)?;
    }
    let jobs: Vec<(Method, u64)> =
        cfg.run.methods.iter().flat_map(|&m| cfg.run.seeds.iter().map(move |&s| (m, s))).collect();
    let results: Vec<Result<(RunArtifacts, String)>> = jobs
        .par_iter()
        .map(|&(method, seed)| {
            let eval = EvalViews::frozen(dataset, &test_spec, cfg.run.eval_seed)?;
            let hash = eval_view_hash(&eval);
            let meta = cfg.meta(seed, method)?;
            let (params, log) = train_method(&model, dataset, &eval, method, &train_spec, &meta, &mut ())?;
            Ok((RunArtifacts { method, seed, params, log }, hash))
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut per_method: Vec<(Method, String, Vec<SeedResult>)> = Vec::new();
    for r in results {
        let (run, hash) = r?;
        if let Some((first, first_hash, _)) = per_method.first() {
            if *first_hash != hash {
                return Err(HarnessError::EvalViewMismatch(first.to_string(), run.method.to_string()));
            }
        }
        let last = run.log.last().expect("at least one epoch");
        let seed_result = SeedResult { seed: run.seed, metrics: metric_map(last.test_loss, &last.test_metrics) };
        match per_method.iter_mut().find(|(m, _, _)| *m == run.method) {
            Some((_, _, list)) => list.push(seed_result),
            None => per_method.push((run.method, hash, vec![seed_result])),
        }
        runs.push(run);
    }
    let report = ResultsReport {
        protocol: cmp.protocol.clone(),
        tag: cmp.tag.clone(),
        train_missing: cmp.train_rates,
        test_missing: cmp.test_rates,
        eval_seed: cfg.run.eval_seed,
        seeds: cfg.run.seeds.clone(),
        methods: summarize(per_method)?,
    };
    Ok((report, runs))
}

/// `report.json`, `report.txt` and `curves/<method>_seed<k>.csv` under `dir`.
pub fn write_comparison(dir: &Path, report: &ResultsReport, runs: &[RunArtifacts]) -> Result<Vec<PathBuf>> {
    let mut written = vec![dir.join("report.json"), dir.join("report.txt")];
    write_atomic(&written[0], report.to_json().as_bytes())?;
    write_atomic(&written[1], report.to_table().as_bytes())?;
    for run in runs {
        let path = dir.join("curves").join(format!("{}_seed{}.csv", run.method, run.seed));
        write_atomic(&path, curve_csv(&run.log).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Directory name for a sweep level, e.g. `level_0.4-0.6`.
pub fn level_dir(level: [f64; 2]) -> String {
    format!("level_{}-{}", level[0], level[1])
}

pub fn run_sweep(cfg: &ExperimentConfig, dataset: &Dataset, levels: &[[f64; 2]]) -> Result<Vec<ResultsReport>> {
    if levels.is_empty() {
        return Err(config("sweep needs at least one rate level"));
    }
    let out = cfg.out_dir();
    let mut reports = Vec::with_capacity(levels.len());
    for &[lo, hi] in levels {
        let rates = RatesSection::uniform(lo, hi);
        let cmp = Comparison {
            protocol: "sweep".into(),
            tag: Some(format!("missing {lo}-{hi}")),
            train_rates: rates,
            test_rates: rates,
        };
        let (report, runs) = run_comparison(cfg, dataset, &cmp)?;
        write_comparison(&out.join(level_dir([lo, hi])), &report, &runs)?;
        reports.push(report);
    }
    Ok(reports)
}

/// Checkpoint and curve for a single run, as written by `train`.
pub fn train_paths(out: &Path, method: Method, seed: u64) -> (PathBuf, PathBuf) {
    (out.join(format!("{method}_seed{seed}.ckpt")), out.join(format!("{method}_seed{seed}_log.csv")))
}

pub fn run_single(cfg: &ExperimentConfig, seed: u64, verbose: bool) -> Result<(Checkpoint, TrainLog, Vec<PathBuf>)> {
    let dataset = load_dataset(cfg)?;
    let method = cfg.train.method;
    let train_spec = cfg.missing.train.resolve("missing.train")?;
    let test_spec = cfg.missing.test.resolve("missing.test")?;
    let model = FusionModel::new(cfg.model_config_for(dataset.header().dims)?)?;
    let eval = EvalViews::frozen(&dataset, &test_spec, cfg.run.eval_seed)?;
    let mut timer = Timer::new(verbose.then(|| format!("{method} seed {seed}")));
    let meta = cfg.meta(seed, method)?;
    let (params, log) = train_method(&model, &dataset, &eval, method, &train_spec, &meta, &mut timer)?;
    let ckpt = Checkpoint { method: method.to_string(), seed, params };
    let (ckpt_path, log_path) = train_paths(&cfg.out_dir(), method, seed);
    ckpt.save(&ckpt_path)?;
    write_atomic(&log_path, curve_csv(&log).as_bytes())?;
    Ok((ckpt, log, vec![ckpt_path, log_path]))
}
