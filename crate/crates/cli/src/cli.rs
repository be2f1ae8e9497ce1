//! Command-line front end.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use m3s_core::stats::welch_t_test;

use crate::config::{parse_level, ExperimentConfig, Method, RatesSection};
use crate::dataset_io::save_csv;
use crate::error::{config, HarnessError, Result};
use crate::experiment::{load_dataset, run_comparison, run_single, run_sweep, write_comparison, Comparison};
use crate::report::{ResultsReport, LOSS_KEY};

#[derive(Debug, Parser)]
#[command(
    name = "m3s",
    version,
    about = "Meta-sampling training experiments on multimodal data with missing modalities"
)]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the data seed (generate), the run seed (train) or the seed
    /// list (compare, sweep, adapt).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `run.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic dataset as CSV.
    Generate,
    /// Train one method for one seed; writes a checkpoint and its curve.
    Train {
        /// Print per-epoch losses and timings to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Run every configured method over the seed list.
    Compare,
    /// Repeat `compare` with train and test rates set to each level.
    Sweep {
        /// Comma-separated levels such as `0.2-0.4,0.4-0.6`; overrides `run.levels`.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<String>>,
    },
    /// Train at one missing-rate range and test at another.
    Adapt {
        /// e.g. `0.4-0.6`; overrides `missing.train`.
        #[arg(long)]
        train_rate: Option<String>,
        /// e.g. `0.6-0.8`; overrides `missing.test`.
        #[arg(long)]
        test_rate: Option<String>,
    },
    /// Welch two-tailed t-test on two samples, or on a report's methods vs ORIG.
    Significance {
        #[arg(long, value_delimiter = ',', requires = "b")]
        a: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', requires = "a")]
        b: Option<Vec<f64>>,
        /// A `report.json` written by compare, sweep or adapt.
        #[arg(long, conflicts_with_all = ["a", "b"])]
        report: Option<PathBuf>,
        #[arg(long, default_value = LOSS_KEY)]
        metric: String,
    },
}

impl Cli {
    fn load_config(&self) -> Result<ExperimentConfig> {
        let path = self.config.as_ref().ok_or_else(|| config("--config <path> is required"))?;
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(out) = &self.out {
            let cwd = std::env::current_dir().map_err(HarnessError::io("."))?;
            cfg.run.out = cwd.join(out);
        }
        Ok(cfg)
    }
}

/// Runs a parsed command and returns what should go to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let mut text = String::new();
    match &cli.command {
        Command::Generate => {
            let mut cfg = cli.load_config()?;
            if let Some(seed) = cli.seed {
                cfg.data.seed = seed;
            }
            let dataset = m3s_core::data::generate_synthetic(&cfg.synthetic()?)?;
            let path = cfg.out_dir().join("dataset.csv");
            save_csv(&path, &dataset)?;
            let [tr, va, te] = dataset.sizes();
            let _ = writeln!(text, "train {tr}  valid {va}  test {te}\n{}", path.display());
        }
        Command::Train { verbose } => {
            let mut cfg = cli.load_config()?;
            let seed = cli.seed.unwrap_or(cfg.run.seeds[0]);
            cfg.run.out = cfg.out_dir().join("train");
            let (_, log, paths) = run_single(&cfg, seed, *verbose)?;
            let last = log.last().expect("at least one epoch");
            let _ = write!(text, "{} seed {seed}: test loss {}", cfg.train.method, last.test_loss);
            for (k, v) in last.test_metrics.entries() {
                let _ = write!(text, "  {k} {v:.4}");
            }
            text.push('\n');
            for p in paths {
                let _ = writeln!(text, "{}", p.display());
            }
        }
        Command::Compare => {
            let cfg = seeded(cli)?;
            let cmp = Comparison {
                protocol: "compare".into(),
                tag: None,
                train_rates: cfg.missing.train,
                test_rates: cfg.missing.test,
            };
            text = compare_into(&cfg, &cmp, "compare")?;
        }
        Command::Adapt { train_rate, test_rate } => {
            let cfg = seeded(cli)?;
            let rates = |flag: &Option<String>, fallback: RatesSection| -> Result<RatesSection> {
                match flag {
                    Some(s) => parse_level(s).map(|[lo, hi]| RatesSection::uniform(lo, hi)),
                    None => Ok(fallback),
                }
            };
            let train = rates(train_rate, cfg.missing.train)?;
            let test = rates(test_rate, cfg.missing.test)?;
            let tag = if train == test {
                format!("train = test {train}")
            } else {
                format!("cross-rate: train {train} / test {test}")
            };
            let cmp = Comparison { protocol: "adapt".into(), tag: Some(tag), train_rates: train, test_rates: test };
            text = compare_into(&cfg, &cmp, "adapt")?;
        }
        Command::Sweep { levels } => {
            let mut cfg = seeded(cli)?;
            let levels = match levels {
                Some(list) => list.iter().map(|s| parse_level(s)).collect::<Result<Vec<_>>>()?,
                None => cfg.run.levels.clone(),
            };
            cfg.run.out = cfg.out_dir().join("sweep");
            let dataset = load_dataset(&cfg)?;
            for report in run_sweep(&cfg, &dataset, &levels)? {
                text.push_str(&report.to_table());
                text.push('\n');
            }
            let _ = writeln!(text, "{}", cfg.out_dir().display());
        }
        Command::Significance { a, b, report, metric } => {
            text = significance(a.as_deref(), b.as_deref(), report.as_ref(), metric)?;
        }
    }
    Ok(text)
}

fn seeded(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = cli.load_config()?;
    if let Some(seed) = cli.seed {
        cfg.run.seeds = vec![seed];
    }
    Ok(cfg)
}

fn compare_into(cfg: &ExperimentConfig, cmp: &Comparison, subdir: &str) -> Result<String> {
    let dataset = load_dataset(cfg)?;
    let (report, runs) = run_comparison(cfg, &dataset, cmp)?;
    let dir = cfg.out_dir().join(subdir);
    write_comparison(&dir, &report, &runs)?;
    Ok(format!("{}\n{}\n", report.to_table(), dir.display()))
}

fn significance(a: Option<&[f64]>, b: Option<&[f64]>, report: Option<&PathBuf>, metric: &str) -> Result<String> {
    let line = |name: &str, x: &[f64], y: &[f64]| -> Result<String> {
        let w = welch_t_test(x, y)?;
        Ok(format!("{name}t {:.6}  df {:.4}  p {:.6}\n", w.t, w.df, w.p_value))
    };
    match (a, b, report) {
        (Some(a), Some(b), None) => line("", a, b),
        (None, None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
            let report = ResultsReport::from_json(&text).map_err(|e| HarnessError::Parse {
                path: path.clone(),
                line: e.line() as u64,
                message: e.to_string(),
            })?;
            let values = |m: Method| -> Option<Vec<f64>> {
                let s = report.method(m)?;
                Some(s.runs.iter().filter_map(|r| r.metrics.get(metric).copied()).collect())
            };
            let base = values(Method::Orig).ok_or_else(|| config("report has no orig runs"))?;
            let mut out = String::new();
            for s in report.methods.iter().filter(|s| s.method != Method::Orig) {
                let v = values(s.method).unwrap_or_default();
                out.push_str(&line(&format!("{} vs orig [{metric}]: ", s.method), &v, &base)?);
            }
            Ok(out)
        }
        _ => Err(config("significance needs either --a and --b, or --report")),
    }
}
