//! Dataset CSV files.
//!
//! Header: `a_0..a_{Ta-1}, v_0..v_{Tv-1}, l_0..l_{Tl-1}, label, split`.
//! One row per sample; `split` is `train`, `valid` or `test`. Regression
//! labels are decimal floats, class labels non-negative integers. Values are
//! written in shortest round-trip form, so save then load is exact.

use std::path::Path;

use m3s_core::data::{Dataset, Header, Label, Modality, Sample, Split, Task};

use crate::error::{HarnessError, Result};
use crate::output::write_atomic;

pub fn header_row(dims: [usize; 3]) -> Vec<String> {
    let mut cols = Vec::with_capacity(dims.iter().sum::<usize>() + 2);
    for m in Modality::ALL {
        cols.extend((0..dims[m.index()]).map(|i| format!("{}_{i}", m.prefix())));
    }
    cols.push("label".into());
    cols.push("split".into());
    cols
}

pub fn to_csv_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HarnessError::Config(format!("csv encoding: {e}"));
    w.write_record(header_row(dataset.header().dims)).map_err(csv_err)?;
    for split in Split::ALL {
        for s in dataset.split(split) {
            let mut row: Vec<String> = s.features.iter().flatten().map(|v| v.to_string()).collect();
            row.push(match s.label {
                Label::Score(y) => y.to_string(),
                Label::Class(c) => c.to_string(),
            });
            row.push(split.name().into());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| HarnessError::Config(format!("csv encoding: {e}")))
}

pub fn save_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    write_atomic(path, &to_csv_bytes(dataset)?)
}

/// Parses a dataset file; `task` fixes how labels are read and checked.
pub fn load_csv(path: &Path, task: Task) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(HarnessError::io(path))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let parse = |line: u64, message: String| HarnessError::Parse { path: path.to_path_buf(), line, message };
    let headers = reader.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let dims = parse_header(path, &headers)?;
    let width = dims.iter().sum::<usize>() + 2;

    let mut splits: [Vec<Sample>; 3] = Default::default();
    for record in reader.records() {
        let record = record.map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(HarnessError::DimMismatch {
                path: path.to_path_buf(),
                line,
                expected: width,
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(width - 2);
        for (col, field) in record.iter().take(width - 2).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse(line, format!("column {}: `{field}` is not a number", &headers[col])))?;
            values.push(v);
        }
        let label_field = &record[width - 2];
        let label = match task {
            Task::Regression { .. } => Label::Score(
                label_field.parse().map_err(|_| parse(line, format!("label `{label_field}` is not a number")))?,
            ),
            Task::Classification { .. } => Label::Class(
                label_field.parse().map_err(|_| parse(line, format!("label `{label_field}` is not a class index")))?,
            ),
        };
        let split = match &record[width - 1] {
            "train" => Split::Train,
            "valid" => Split::Valid,
            "test" => Split::Test,
            other => return Err(parse(line, format!("unknown split `{other}`"))),
        };
        let (a, rest) = values.split_at(dims[0]);
        let (v, l) = rest.split_at(dims[1]);
        let sample = Sample { features: [a.to_vec(), v.to_vec(), l.to_vec()], label };
        splits[split as usize].push(sample);
    }
    for split in Split::ALL {
        if splits[split as usize].is_empty() {
            return Err(HarnessError::EmptySplit { path: path.to_path_buf(), split: split.name() });
        }
    }
    let [train, valid, test] = splits;
    Ok(Dataset::new(Header { dims, task }, train, valid, test)?)
}

fn parse_header(path: &Path, headers: &csv::StringRecord) -> Result<[usize; 3]> {
    let missing = |column: String| HarnessError::MissingColumn { path: path.to_path_buf(), column };
    let cols: Vec<&str> = headers.iter().collect();
    let mut pos = 0;
    let mut dims = [0; 3];
    for m in Modality::ALL {
        while cols.get(pos).is_some_and(|c| *c == format!("{}_{}", m.prefix(), dims[m.index()])) {
            dims[m.index()] += 1;
            pos += 1;
        }
        if dims[m.index()] == 0 {
            return Err(missing(format!("{}_0", m.prefix())));
        }
    }
    for name in ["label", "split"] {
        if cols.get(pos) != Some(&name) {
            return Err(missing(name.into()));
        }
        pos += 1;
    }
    if pos != cols.len() {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected column `{}`", cols[pos]),
        });
    }
    Ok(dims)
}
