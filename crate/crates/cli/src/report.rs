//! Results reports: JSON, aligned text tables and per-epoch curve CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use m3s_core::metrics::MetricReport;
use m3s_core::stats::{mean, sample_std, welch_t_test};
use m3s_core::train::{EpochRecord, TrainLog};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RatesSection};
use crate::error::{HarnessError, Result};

/// Key of the final test loss (MSE for regression, cross-entropy for
/// classification) in every metric map.
pub const LOSS_KEY: &str = "Loss";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// SHA-256 of the masked validation and test views this method was scored on.
    pub eval_view_sha256: String,
    pub runs: Vec<SeedResult>,
    pub mean: BTreeMap<String, f64>,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub std: BTreeMap<String, f64>,
    /// `mean − mean(ORIG)` per metric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_vs_orig: Option<BTreeMap<String, f64>>,
    /// Welch two-tailed p-value against ORIG's per-seed values; `null` where
    /// the test is undefined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_vs_orig: Option<BTreeMap<String, Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsReport {
    /// `compare`, `sweep` or `adapt`.
    pub protocol: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub train_missing: RatesSection,
    pub test_missing: RatesSection,
    pub eval_seed: u64,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
}

pub fn metric_map(test_loss: f64, report: &MetricReport) -> BTreeMap<String, f64> {
    let mut map: BTreeMap<String, f64> = report.entries().map(|(k, v)| (k.to_string(), v)).collect();
    map.insert(LOSS_KEY.into(), test_loss);
    map
}

/// p-value of Welch's test; a zero standard error gives 1 for equal means
/// and `None` otherwise.
pub fn p_value(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    match welch_t_test(a, b) {
        Ok(w) => Some(w.p_value),
        Err(_) if mean(a) == mean(b) => Some(1.0),
        Err(_) => None,
    }
}

/// Per-method aggregation of per-seed results, with deltas and p-values
/// against ORIG when it is among the methods.
pub fn summarize(per_method: Vec<(Method, String, Vec<SeedResult>)>) -> Result<Vec<MethodSummary>> {
    if let Some((m0, h0, _)) = per_method.first() {
        if let Some((m, _, _)) = per_method.iter().find(|(_, h, _)| h != h0) {
            return Err(HarnessError::EvalViewMismatch(m0.to_string(), m.to_string()));
        }
    }
    let column = |runs: &[SeedResult], key: &str| -> Vec<f64> {
        runs.iter().filter_map(|r| r.metrics.get(key).copied()).collect()
    };
    let keys = |runs: &[SeedResult]| -> Vec<String> {
        let mut ks: Vec<String> = runs.iter().flat_map(|r| r.metrics.keys().cloned()).collect();
        ks.sort();
        ks.dedup();
        ks
    };
    let orig = per_method.iter().find(|(m, _, _)| *m == Method::Orig).map(|(_, _, r)| r.clone());
    let mut out = Vec::with_capacity(per_method.len());
    for (method, hash, runs) in per_method {
        let mut mean_map = BTreeMap::new();
        let mut std_map = BTreeMap::new();
        for key in keys(&runs) {
            let values = column(&runs, &key);
            mean_map.insert(key.clone(), mean(&values));
            std_map.insert(key, sample_std(&values));
        }
        let (delta, p) = match (&orig, method) {
            (Some(base), m) if m != Method::Orig => {
                let mut delta = BTreeMap::new();
                let mut p = BTreeMap::new();
                for (key, value) in &mean_map {
                    let base_values = column(base, key);
                    if base_values.is_empty() {
                        continue;
                    }
                    delta.insert(key.clone(), value - mean(&base_values));
                    p.insert(key.clone(), p_value(&column(&runs, key), &base_values));
                }
                let p = (runs.len() >= 2 && base.len() >= 2).then_some(p);
                (Some(delta), p)
            }
            _ => (None, None),
        };
        out.push(MethodSummary {
            method,
            eval_view_sha256: hash,
            runs,
            mean: mean_map,
            std: std_map,
            delta_vs_orig: delta,
            p_vs_orig: p,
        });
    }
    Ok(out)
}

impl ResultsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Metric columns in display order.
    fn columns(&self) -> Vec<&'static str> {
        std::iter::once(LOSS_KEY)
            .chain(MetricReport::KEYS)
            .filter(|k| self.methods.iter().any(|m| m.mean.contains_key(*k)))
            .collect()
    }

    /// Aligned text table: mean ± std per method, then Δ and p rows.
    pub fn to_table(&self) -> String {
        let cols = self.columns();
        let mut rows: Vec<Vec<String>> =
            vec![std::iter::once("Method".to_string()).chain(cols.iter().map(|c| c.to_string())).collect()];
        for m in &self.methods {
            let mut row = vec![m.method.label().to_string()];
            for c in &cols {
                row.push(match (m.mean.get(*c), m.std.get(*c)) {
                    (Some(mu), Some(sd)) => format!("{mu:.4} ± {sd:.4}"),
                    _ => "-".into(),
                });
            }
            rows.push(row);
        }
        for m in &self.methods {
            if let Some(delta) = &m.delta_vs_orig {
                let mut row = vec![format!("Δ_ORIG ({})", m.method)];
                row.extend(cols.iter().map(|c| delta.get(*c).map_or("-".into(), |d| format!("{d:+.4}"))));
                rows.push(row);
            }
            if let Some(p) = &m.p_vs_orig {
                let mut row = vec![format!("p vs ORIG ({})", m.method)];
                row.extend(cols.iter().map(|c| match p.get(*c) {
                    Some(Some(v)) => format!("{v:.4}"),
                    _ => "-".into(),
                }));
                rows.push(row);
            }
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        if let Some(tag) = &self.tag {
            let _ = writeln!(out, "[{}] {tag}", self.protocol);
        }
        for (ri, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    let pad = w - cell.chars().count();
                    if i == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if ri == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}

/// Per-epoch curve as CSV:
/// `epoch,train_loss,valid_loss,test_loss,valid_<metric>...,test_<metric>...`.
/// Undefined metrics are left empty. Wall-clock time is not included, so
/// reruns produce identical bytes.
pub fn curve_csv(log: &TrainLog) -> String {
    let present: Vec<&str> = MetricReport::KEYS
        .into_iter()
        .filter(|k| log.records.iter().any(|r| r.test_metrics.get(k).is_some() || r.valid_metrics.get(k).is_some()))
        .collect();
    let mut out = String::from("epoch,train_loss,valid_loss,test_loss");
    for split in ["valid", "test"] {
        for k in &present {
            let _ = write!(out, ",{split}_{k}");
        }
    }
    out.push('\n');
    for r in &log.records {
        write_curve_row(&mut out, r, &present);
    }
    out
}

fn write_curve_row(out: &mut String, r: &EpochRecord, keys: &[&str]) {
    let _ = write!(out, "{},{},{},{}", r.epoch, r.train_loss, r.valid_loss, r.test_loss);
    for metrics in [&r.valid_metrics, &r.test_metrics] {
        for k in keys {
            out.push(',');
            if let Some(v) = metrics.get(k) {
                let _ = write!(out, "{v}");
            }
        }
    }
    out.push('\n');
}
