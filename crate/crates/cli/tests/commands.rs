use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use m3s_core::data::{generate_synthetic, Split};
use m3s_core::model::Batch;
use m3s_core::train::EvalViews;
use m3s_harness::config::{ExperimentConfig, Method, RatesSection};
use m3s_harness::dataset_io::load_csv;
use m3s_harness::experiment::{eval_view_hash, run_comparison, run_sweep, Comparison};
use m3s_harness::report::{summarize, ResultsReport, SeedResult, LOSS_KEY};
use m3s_harness::{run, Cli};

const TINY: &str = "\
[model]
encoder_hidden = [6]
fusion_hidden = [6]

[data]
dims = [5, 5, 6]
sizes = [64, 20, 20]

[train]
alpha = 1e-3
beta = 5e-3
batch_size = 16
epochs = 2

[run]
seeds = [0, 1, 2]
levels = [[0.2, 0.4], [0.5, 0.5]]
";

fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path
}

fn cli(config: &Path, out: &Path, args: &[&str]) -> Cli {
    let mut argv = vec!["m3s", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    Cli::try_parse_from(argv).unwrap()
}

fn read_report(path: &Path) -> ResultsReport {
    ResultsReport::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_is_byte_identical_and_matches_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sims.toml");
    std::fs::write(&config, "[data]\ndims = [3, 3, 3]\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&cli(&config, &a, &["generate"])).unwrap();
    run(&cli(&config, &b, &["generate"])).unwrap();
    let bytes = std::fs::read(a.join("dataset.csv")).unwrap();
    assert_eq!(bytes, std::fs::read(b.join("dataset.csv")).unwrap());
    let ds = load_csv(&a.join("dataset.csv"), m3s_core::data::Task::Regression { lo: -1.0, hi: 1.0 }).unwrap();
    assert_eq!(ds.sizes(), [1368, 456, 457]);

    run(&cli(&config, &b, &["--seed", "9", "generate"])).unwrap();
    assert_ne!(bytes, std::fs::read(b.join("dataset.csv")).unwrap());

    std::fs::write(&config, "[data]\nsizes = [10, 0, 5]\n").unwrap();
    let err = run(&cli(&config, &a, &["generate"])).unwrap_err();
    assert_eq!(err.exit_code(), 1, "{err}");
}

#[test]
fn compare_report_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), "");
    let out = dir.path().join("out");
    let stdout = run(&cli(&config, &out, &["compare"])).unwrap();
    assert!(stdout.contains("ORIG + M3S"), "{stdout}");
    let text = std::fs::read_to_string(out.join("compare/report.json")).unwrap();
    let report = ResultsReport::from_json(&text).unwrap();
    assert_eq!(report.to_json(), text);
    assert_eq!(report.methods.len(), 3);
    let hash = &report.methods[0].eval_view_sha256;
    for m in &report.methods {
        assert_eq!(&m.eval_view_sha256, hash);
        assert_eq!(m.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
        for (key, mean) in &m.mean {
            let values: Vec<f64> = m.runs.iter().map(|r| r.metrics[key]).collect();
            let direct = values.iter().sum::<f64>() / values.len() as f64;
            assert!((mean - direct).abs() <= 1e-12, "{key}");
        }
        assert_eq!(m.delta_vs_orig.is_some(), m.method != Method::Orig);
    }
    for method in ["orig", "spl_trn", "m3s"] {
        for seed in 0..3 {
            let curve = std::fs::read_to_string(out.join(format!("compare/curves/{method}_seed{seed}.csv"))).unwrap();
            assert!(curve.starts_with("epoch,train_loss,valid_loss,test_loss,valid_MAE"));
            assert_eq!(curve.lines().count(), 3);
        }
    }
    assert_eq!(std::fs::read_to_string(out.join("compare/report.txt")).unwrap(), report.to_table());

    let sig = run(&Cli::try_parse_from([
        "m3s",
        "significance",
        "--report",
        out.join("compare/report.json").to_str().unwrap(),
    ])
    .unwrap())
    .unwrap();
    assert_eq!(sig.lines().count(), 2, "{sig}");
    assert!(sig.starts_with("spl_trn vs orig [Loss]: t "), "{sig}");
}

#[test]
fn single_method_has_no_comparison_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), "methods = [\"spl_trn\"]\n");
    let out = dir.path().join("out");
    run(&cli(&config, &out, &["--seed", "4", "compare"])).unwrap();
    let report = read_report(&out.join("compare/report.json"));
    assert_eq!(report.seeds, vec![4]);
    assert_eq!(report.methods.len(), 1);
    let only = &report.methods[0];
    assert!(only.delta_vs_orig.is_none() && only.p_vs_orig.is_none());
    assert!(only.std.values().all(|s| *s == 0.0));
    assert!(!report.to_table().contains("Δ_ORIG"));
}

#[test]
fn identical_streams_give_zero_delta_and_unit_p() {
    let runs: Vec<SeedResult> = (0..4)
        .map(|seed| SeedResult { seed, metrics: BTreeMap::from([(LOSS_KEY.to_string(), 0.5 + seed as f64 * 0.01)]) })
        .collect();
    let summary =
        summarize(vec![(Method::Orig, "h".into(), runs.clone()), (Method::SplTrn, "h".into(), runs.clone())]).unwrap();
    assert_eq!(summary[1].delta_vs_orig.as_ref().unwrap()[LOSS_KEY], 0.0);
    assert_eq!(summary[1].p_vs_orig.as_ref().unwrap()[LOSS_KEY], Some(1.0));

    let mismatch = summarize(vec![(Method::Orig, "h".into(), runs.clone()), (Method::M3s, "g".into(), runs)]);
    assert!(mismatch.is_err());
}

#[test]
fn adapt_at_equal_rates_reproduces_compare() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), "");
    let out = dir.path().join("out");
    run(&cli(&config, &out, &["compare"])).unwrap();
    run(&cli(&config, &out, &["adapt", "--train-rate", "0.4-0.6", "--test-rate", "0.4-0.6"])).unwrap();
    let compare = read_report(&out.join("compare/report.json"));
    let adapt = read_report(&out.join("adapt/report.json"));
    assert_eq!(adapt.methods, compare.methods);
    assert_eq!(adapt.tag.as_deref(), Some("train = test 0.4-0.6"));

    run(&cli(&config, &out, &["adapt", "--test-rate", "0.6-0.8"])).unwrap();
    let cross = read_report(&out.join("adapt/report.json"));
    assert_eq!(cross.tag.as_deref(), Some("cross-rate: train 0.4-0.6 / test 0.6-0.8"));
    assert_ne!(cross.methods[0].eval_view_sha256, compare.methods[0].eval_view_sha256);
}

#[test]
fn zero_test_rate_scores_clean_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&tiny_config(dir.path(), "methods = [\"orig\"]\n")).unwrap();
    let ds = generate_synthetic(&cfg.synthetic().unwrap()).unwrap();
    let cmp = Comparison {
        protocol: "adapt".into(),
        tag: None,
        train_rates: RatesSection::uniform(0.4, 0.6),
        test_rates: RatesSection::uniform(0.0, 0.0),
    };
    let (report, _) = run_comparison(&cfg, &ds, &cmp).unwrap();
    let clean = EvalViews {
        valid: Batch::from_samples(ds.split(Split::Valid)).unwrap(),
        test: Batch::from_samples(ds.split(Split::Test)).unwrap(),
    };
    assert_eq!(report.methods[0].eval_view_sha256, eval_view_hash(&clean));
}

#[test]
fn sweep_writes_one_report_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), "methods = [\"orig\", \"m3s\"]\neval_seed = 5\n");
    let out = dir.path().join("out");
    run(&cli(&config, &out, &["sweep"])).unwrap();
    for level in ["level_0.2-0.4", "level_0.5-0.5"] {
        let report = read_report(&out.join("sweep").join(level).join("report.json"));
        assert_eq!(report.protocol, "sweep");
        assert_eq!(report.train_missing, report.test_missing);
        assert_eq!(report.eval_seed, 5);
    }
    let cfg = ExperimentConfig::load(&config).unwrap();
    let ds = generate_synthetic(&cfg.synthetic().unwrap()).unwrap();
    assert_eq!(run_sweep(&cfg, &ds, &[]).unwrap_err().exit_code(), 1);
}

#[test]
fn train_writes_checkpoint_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), "");
    let out = dir.path().join("out");
    let stdout = run(&cli(&config, &out, &["--seed", "2", "train"])).unwrap();
    assert!(stdout.starts_with("m3s seed 2: test loss "), "{stdout}");
    let ckpt = m3s_harness::checkpoint::Checkpoint::load(&out.join("train/m3s_seed2.ckpt")).unwrap();
    assert_eq!((ckpt.method.as_str(), ckpt.seed), ("m3s", 2));
    assert!(out.join("train/m3s_seed2_log.csv").exists());
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_m3s")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), "");
    let config = config.to_str().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let (code, stdout, _) = binary(&["--config", config, "--out", out, "generate"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("train 64  valid 20  test 20"), "{stdout}");

    assert_eq!(binary(&["compare"]).0, 1);
    assert_eq!(binary(&["--config", config, "sweep", "--levels", "0.9-0.1"]).0, 1);
    assert_eq!(binary(&["frobnicate"]).0, 1);
    assert_eq!(binary(&["--help"]).0, 0);

    let csv_config = dir.path().join("csv.toml");
    std::fs::write(&csv_config, "[data]\nsource = \"csv\"\npath = \"absent.csv\"\n[train]\nalpha = 0.1\n").unwrap();
    let (code, _, stderr) = binary(&["--config", csv_config.to_str().unwrap(), "--out", out, "compare"]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: ") && stderr.contains("absent.csv"), "{stderr}");

    let (code, stdout, _) = binary(&["significance", "--a", "1,2,3,4", "--b", "2,3,4,5"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("t -1.095445  df 6.0000  p "), "{stdout}");
    assert_eq!(binary(&["significance", "--a", "1,1", "--b", "1,1"]).0, 2);
}
