//! Evaluation metrics for sentiment regression and emotion classification.

use alloc::vec;
use alloc::vec::Vec;

use crate::diff::Tensor;
use crate::error::{Error, Result};

/// Metric values keyed by their conventional column names. Absent values
/// are either not applicable to the task or undefined (a constant
/// prediction has no correlation).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub mae: Option<f64>,
    pub corr: Option<f64>,
    pub acc2: Option<f64>,
    pub f1: Option<f64>,
    pub acc: Option<f64>,
    pub uar: Option<f64>,
    pub acc7: Option<f64>,
}

impl MetricReport {
    pub const KEYS: [&'static str; 7] = ["MAE", "Corr", "Acc-2", "F1-Score", "Acc", "Uar", "Acc-7"];

    pub fn get(&self, key: &str) -> Option<f64> {
        match key {
            "MAE" => self.mae,
            "Corr" => self.corr,
            "Acc-2" => self.acc2,
            "F1-Score" => self.f1,
            "Acc" => self.acc,
            "Uar" => self.uar,
            "Acc-7" => self.acc7,
            _ => None,
        }
    }

    pub fn set(&mut self, key: &str, value: Option<f64>) {
        let slot = match key {
            "MAE" => &mut self.mae,
            "Corr" => &mut self.corr,
            "Acc-2" => &mut self.acc2,
            "F1-Score" => &mut self.f1,
            "Acc" => &mut self.acc,
            "Uar" => &mut self.uar,
            "Acc-7" => &mut self.acc7,
            _ => return,
        };
        *slot = value;
    }

    /// Present metrics in column order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        Self::KEYS.iter().filter_map(|k| self.get(k).map(|v| (*k, v)))
    }

    /// Whether larger is better (everything except MAE).
    pub fn higher_is_better(key: &str) -> bool {
        key != "MAE"
    }
}

fn check_pair(a: &[f64], b: &[f64], what: &'static str) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, "mae")?;
    Ok(preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / preds.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, "pearson")?;
    if preds.len() < 2 {
        return Err(Error::ConstantInput);
    }
    let constant = |xs: &[f64]| xs.iter().all(|v| *v == xs[0]);
    if constant(preds) || constant(labels) {
        return Err(Error::ConstantInput);
    }
    let n = preds.len() as f64;
    let mx = preds.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in preds.iter().zip(labels) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Binary accuracy after thresholding both sides; values `>= threshold`
/// count as positive.
pub fn acc2(preds: &[f64], labels: &[f64], threshold: f64) -> Result<f64> {
    check_pair(preds, labels, "acc2")?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| (**p >= threshold) == (**y >= threshold)).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Index of the sentiment interval in `-3..=3`: round half away from zero,
/// then clamp.
pub fn sentiment_interval(x: f64) -> i32 {
    libm::round(x).clamp(-3.0, 3.0) as i32
}

/// Seven-interval accuracy over `[-3, 3]`.
pub fn acc7(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, "acc7")?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| sentiment_interval(**p) == sentiment_interval(**y)).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub acc: f64,
    /// Mean recall over classes present in the true labels.
    pub uar: f64,
    /// Support-weighted mean of per-class F1.
    pub weighted_f1: f64,
}

pub fn classification_metrics(pred: &[usize], truth: &[usize], classes: usize) -> Result<ClassificationMetrics> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("classification_metrics"));
    }
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), found: pred.len() });
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        for label in [p, t] {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        confusion[t][p] += 1;
    }
    let n = truth.len() as f64;
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let mut recall_sum = 0.0;
    let mut present = 0usize;
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let tp = confusion[c][c] as f64;
        if support == 0 {
            continue;
        }
        present += 1;
        let recall = tp / support as f64;
        recall_sum += recall;
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        f1_sum += support as f64 * f1;
    }
    Ok(ClassificationMetrics { acc: correct as f64 / n, uar: recall_sum / present as f64, weighted_f1: f1_sum / n })
}

/// MAE, Corr, Acc-2, F1-Score (on the Acc-2 binarization) and Acc-7.
pub fn regression_report(preds: &[f64], labels: &[f64]) -> Result<MetricReport> {
    let binarize = |xs: &[f64]| -> Vec<usize> { xs.iter().map(|&x| usize::from(x >= 0.0)).collect() };
    let binary = classification_metrics(&binarize(preds), &binarize(labels), 2)?;
    Ok(MetricReport {
        mae: Some(mae(preds, labels)?),
        corr: match pearson(preds, labels) {
            Ok(r) => Some(r),
            Err(Error::ConstantInput) => None,
            Err(e) => return Err(e),
        },
        acc2: Some(acc2(preds, labels, 0.0)?),
        f1: Some(binary.weighted_f1),
        acc7: Some(acc7(preds, labels)?),
        ..MetricReport::default()
    })
}

/// Row-wise argmax (first maximum wins).
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let cols = logits.shape().last().copied().unwrap_or(1).max(1);
    logits
        .data()
        .chunks(cols)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

/// Acc, Uar and F1-Score from logits.
pub fn classification_report(logits: &Tensor, truth: &[usize], classes: usize) -> Result<MetricReport> {
    let m = classification_metrics(&argmax_rows(logits), truth, classes)?;
    Ok(MetricReport { acc: Some(m.acc), uar: Some(m.uar), f1: Some(m.weighted_f1), ..MetricReport::default() })
}
