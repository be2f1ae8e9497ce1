use std::path::Path;

use m3s_core::data::{generate_synthetic, Split, SyntheticConfig, Task};
use m3s_harness::checkpoint::Checkpoint;
use m3s_harness::config::{parse_level, ExperimentConfig, Method};
use m3s_harness::dataset_io::{load_csv, save_csv};
use m3s_harness::HarnessError;

const REGRESSION: Task = Task::Regression { lo: -1.0, hi: 1.0 };

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for task in [REGRESSION, Task::Classification { classes: 4 }] {
        let ds = generate_synthetic(&SyntheticConfig {
            dims: [3, 4, 5],
            sizes: [20, 6, 7],
            task,
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        let path = dir.path().join("data.csv");
        save_csv(&path, &ds).unwrap();
        assert_eq!(load_csv(&path, task).unwrap(), ds);
    }
}

#[test]
fn csv_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let header = "a_0,a_1,v_0,l_0,label,split\n";
    let good = "0.1,0.2,0.3,0.4,0.5,train\n1,2,3,4,0,valid\n1,2,3,4,0,test\n";

    let path = write(dir.path(), "ok.csv", &format!("{header}{good}"));
    let ds = load_csv(&path, REGRESSION).unwrap();
    assert_eq!(ds.header().dims, [2, 1, 1]);
    assert_eq!(ds.split(Split::Train)[0].features[0], vec![0.1, 0.2]);

    let path = write(dir.path(), "nan.csv", &format!("{header}{good}1,x,3,4,0,train\n"));
    match load_csv(&path, REGRESSION) {
        Err(HarnessError::Parse { line, message, .. }) => {
            assert_eq!(line, 5);
            assert!(message.contains("a_1"), "{message}");
        }
        other => panic!("{other:?}"),
    }

    let path = write(dir.path(), "short.csv", &format!("{header}1,2,3,0,train\n"));
    assert!(matches!(
        load_csv(&path, REGRESSION),
        Err(HarnessError::DimMismatch { line: 2, expected: 6, found: 5, .. })
    ));

    let path = write(dir.path(), "split.csv", &format!("{header}1,2,3,4,0,dev\n"));
    assert!(matches!(load_csv(&path, REGRESSION), Err(HarnessError::Parse { line: 2, .. })));

    let path = write(dir.path(), "class.csv", &format!("{header}1,2,3,4,0.5,train\n"));
    let classes = Task::Classification { classes: 2 };
    assert!(matches!(load_csv(&path, classes), Err(HarnessError::Parse { line: 2, .. })));

    let path = write(dir.path(), "empty.csv", header);
    assert!(matches!(load_csv(&path, REGRESSION), Err(HarnessError::EmptySplit { split: "train", .. })));

    let path = write(dir.path(), "novalid.csv", &format!("{header}1,2,3,4,0,train\n1,2,3,4,0,test\n"));
    assert!(matches!(load_csv(&path, REGRESSION), Err(HarnessError::EmptySplit { split: "valid", .. })));

    let path = write(dir.path(), "nolabel.csv", "a_0,v_0,l_0,split\n1,2,3,train\n");
    assert!(matches!(
        load_csv(&path, REGRESSION),
        Err(HarnessError::MissingColumn { column, .. }) if column == "label"
    ));

    let path = write(dir.path(), "novideo.csv", "a_0,l_0,label,split\n1,2,3,train\n");
    assert!(matches!(
        load_csv(&path, REGRESSION),
        Err(HarnessError::MissingColumn { column, .. }) if column == "v_0"
    ));

    let missing = dir.path().join("absent.csv");
    let err = load_csv(&missing, REGRESSION).unwrap_err();
    assert!(matches!(err, HarnessError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn checkpoint_round_trip() {
    let model = m3s_core::model::FusionModel::new(ExperimentConfig::default().model_config().unwrap()).unwrap();
    let ckpt = Checkpoint { method: Method::M3s.to_string(), seed: 7, params: model.init_params(7) };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("m.ckpt");
    ckpt.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);

    let truncated: String = ckpt.to_text().lines().take(4).collect::<Vec<_>>().join("\n");
    assert!(matches!(Checkpoint::parse(&truncated, &path), Err(HarnessError::Parse { .. })));
    assert!(matches!(Checkpoint::parse("hello\n", &path), Err(HarnessError::Parse { line: 1, .. })));
}

#[test]
fn config_defaults_and_errors() {
    let base = Path::new("/work");
    let cfg = ExperimentConfig::from_toml("[train]\nalpha = 0.01\n", base).unwrap();
    assert_eq!(cfg.run.seeds, vec![0, 1, 2, 3, 4]);
    assert_eq!(cfg.out_dir(), base.join("runs"));
    assert_eq!(cfg.meta(3, Method::M3s).unwrap().alpha, 0.01);

    let rejected = [
        "[train]\nalpah = 0.1\n",
        "[model]\nencoder_hidden = [8]\nextra = 1\n",
        "[train]\nmethod = \"spl_trn\"\nbatch_size = 0\n",
        "[train]\nalpha = 0.1\n[data]\ntask = \"classification\"\n",
        "[train]\nalpha = 0.1\n[data]\nsource = \"csv\"\n",
        "[train]\nalpha = 0.1\n[missing.train]\nall = [0.7, 0.2]\n",
        "[train]\nalpha = 0.1\n[run]\nmethods = [\"orig\", \"orig\"]\n",
        "[train]\nalpha = 0.1\n[run]\nseeds = []\n",
        "not toml at all",
    ];
    for text in rejected {
        let err = ExperimentConfig::from_toml(text, base).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{text}: {err}");
    }

    // alpha may be omitted as long as M3S never runs
    let cfg = ExperimentConfig::from_toml("[run]\nmethods = [\"orig\", \"m3s\"]\n", base).unwrap();
    assert!(cfg.meta(0, Method::Orig).is_ok());
    assert_eq!(cfg.meta(0, Method::M3s).unwrap_err().exit_code(), 1);

    let per_modality = "[train]\nalpha = 0.1\n[missing.test]\nall = [0.2, 0.4]\nlanguage = [0.0, 0.0]\n";
    let cfg = ExperimentConfig::from_toml(per_modality, base).unwrap();
    let spec = cfg.missing.test.resolve("missing.test").unwrap();
    assert!(!spec.is_zero());
    assert_eq!(cfg.missing.test.to_string(), "audio 0.2-0.4, video 0.2-0.4, language 0-0");
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["default.toml", "adapt.toml", "smoke.toml"] {
        let cfg = ExperimentConfig::load(&root.join(name)).unwrap();
        for &m in &cfg.run.methods {
            cfg.meta(0, m).unwrap();
        }
    }
    let default = ExperimentConfig::load(&root.join("default.toml")).unwrap();
    assert_eq!(
        ExperimentConfig {
            base_dir: default.base_dir.clone(),
            run: default.run.clone(),
            ..ExperimentConfig::default()
        },
        default
    );
}

#[test]
fn rate_levels() {
    assert_eq!(parse_level("0.4-0.6").unwrap(), [0.4, 0.6]);
    assert_eq!(parse_level(" 0.3 ").unwrap(), [0.3, 0.3]);
    for bad in ["0.6-0.4", "x-0.2", "0.5-1.5", ""] {
        assert_eq!(parse_level(bad).unwrap_err().exit_code(), 1, "{bad}");
    }
}
