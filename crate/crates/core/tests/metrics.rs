use m3s_core::metrics::*;
use m3s_core::stats::{student_t_two_tailed, welch_t_test};
use m3s_core::{Error, Rng};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Per-class counts straight from the label lists.
fn reference(pred: &[usize], truth: &[usize], classes: usize) -> ClassificationMetrics {
    let n = truth.len() as f64;
    let acc = pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n;
    let (mut recalls, mut present, mut f1) = (0.0, 0usize, 0.0);
    for c in 0..classes {
        let tp = (0..truth.len()).filter(|&i| truth[i] == c && pred[i] == c).count();
        let fal_neg = (0..truth.len()).filter(|&i| truth[i] == c && pred[i] != c).count();
        let fal_pos = (0..truth.len()).filter(|&i| truth[i] != c && pred[i] == c).count();
        let support = tp + fal_neg;
        if support == 0 {
            continue;
        }
        present += 1;
        let r = tp as f64 / support as f64;
        let p = if tp + fal_pos == 0 { 0.0 } else { tp as f64 / (tp + fal_pos) as f64 };
        recalls += r;
        f1 += support as f64 * if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    ClassificationMetrics { acc, uar: recalls / present as f64, weighted_f1: f1 / n }
}

#[test]
fn classification_matches_brute_force() {
    let mut rng = Rng::seeded(99);
    for _ in 0..1000 {
        let classes = 2 + rng.index_inclusive(5);
        let n = 1 + rng.index_inclusive(40);
        let truth: Vec<usize> = (0..n).map(|_| rng.index_inclusive(classes - 1)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.index_inclusive(classes - 1)).collect();
        assert_eq!(classification_metrics(&pred, &truth, classes).unwrap(), reference(&pred, &truth, classes));
    }
}

#[test]
fn pearson_example() {
    let (x, y) = ([1.0, 2.0, 3.0], [2.0, 4.0, 7.0]);
    // means 2 and 13/3; deviations (−1, 0, 1) and (−7/3, −1/3, 8/3)
    let direct = 5.0 / (2.0f64 * (49.0 + 1.0 + 64.0) / 9.0).sqrt();
    let r = pearson(&x, &y).unwrap();
    assert!((r - direct).abs() < 1e-12);
    assert!((r - 0.9934).abs() < 1e-3);
}

#[test]
fn regression_examples() {
    assert_eq!(mae(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 1.0);
    assert!((acc2(&[0.5, -0.2, 0.1], &[1.0, 0.3, 0.4], 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(acc7(&[2.6, -3.7, 0.49], &[3.0, -3.0, 0.0]).unwrap(), 1.0);
    assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ConstantInput)));
    assert!(mae(&[], &[]).is_err());
}

/// Composite Simpson over a fixed fine grid, on the density directly.
fn brute_force_p(t: f64, df: f64) -> f64 {
    let ln_c = libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let steps = 200_000;
    let b = t.abs();
    let h = b / steps as f64;
    let mut acc = pdf(0.0) + pdf(b);
    for i in 1..steps {
        acc += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (1.0 - 2.0 * acc * h / 3.0).clamp(0.0, 1.0)
}

#[test]
fn t_tail_matches_references() {
    for &df in &[1.0, 2.5, 4.0, 7.3, 12.0, 30.0, 150.0] {
        for &t in &[0.0, 0.2, 0.9, 1.0, 1.7, 2.5, 4.0, 8.0] {
            let p = student_t_two_tailed(t, df);
            let statrs = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t));
            assert!((p - statrs).abs() < 1e-6, "t={t} df={df}: {p} vs statrs {statrs}");
            assert!((p - brute_force_p(t, df)).abs() < 1e-6, "t={t} df={df}: {p} vs simpson");
        }
    }
}

#[test]
fn welch_examples_match_references() {
    let cases: [(&[f64], &[f64]); 3] = [
        (&[0.81, 0.79, 0.84, 0.80, 0.83], &[0.76, 0.78, 0.74, 0.77, 0.75]),
        (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]),
        (&[10.2, 9.8, 10.5], &[9.1, 9.4, 8.7, 9.9, 9.0, 9.3]),
    ];
    for (a, b) in cases {
        let w = welch_t_test(a, b).unwrap();
        let statrs = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, w.df).unwrap().cdf(w.t.abs()));
        assert!((w.p_value - statrs).abs() < 1e-6);
        assert!((w.p_value - brute_force_p(w.t, w.df)).abs() < 1e-6);
    }
}

proptest! {
    #[test]
    fn regression_metrics_in_range(pairs in prop::collection::vec((-3.5f64..3.5, -3.5f64..3.5), 2..60)) {
        let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = regression_report(&p, &y).unwrap();
        prop_assert!(r.mae.unwrap() >= 0.0);
        for v in [r.acc2, r.f1, r.acc7].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if let Some(c) = r.corr {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn pearson_affine_invariance(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3) && y.iter().any(|v| (v - y[0]).abs() > 1e-3));
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (r0, r1) = (pearson(&x, &y).unwrap(), pearson(&moved, &y).unwrap());
        prop_assert!((r0 - r1).abs() < 1e-9);
        let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        prop_assert!((pearson(&flipped, &y).unwrap() + r0).abs() < 1e-9);
    }

    #[test]
    fn acc7_ignores_jitter_inside_intervals(
        centres in prop::collection::vec(-3i32..=3, 1..30),
        jitter in prop::collection::vec(-0.49f64..0.49, 30),
    ) {
        let labels: Vec<f64> = centres.iter().map(|&c| f64::from(c)).collect();
        let preds: Vec<f64> = labels.iter().zip(&jitter).map(|(c, j)| c + j).collect();
        prop_assert_eq!(acc7(&preds, &labels).unwrap(), 1.0);
    }

    #[test]
    fn classification_bounds(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80),
    ) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = classification_metrics(&pred, &truth, 4).unwrap();
        for v in [m.acc, m.uar, m.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let perfect = classification_metrics(&truth, &truth, 4).unwrap();
        prop_assert_eq!((perfect.acc, perfect.uar, perfect.weighted_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn welch_is_antisymmetric(
        a in prop::collection::vec(-10.0f64..10.0, 2..12),
        b in prop::collection::vec(-10.0f64..10.0, 2..12),
    ) {
        let (Ok(ab), Ok(ba)) = (welch_t_test(&a, &b), welch_t_test(&b, &a)) else {
            return Ok(());
        };
        prop_assert!((ab.t + ba.t).abs() < 1e-12);
        prop_assert!((ab.df - ba.df).abs() < 1e-9 * ab.df.max(1.0));
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn t_tail_decreases_in_t(df in 1.0f64..60.0, t in 0.0f64..6.0, dt in 0.01f64..2.0) {
        prop_assert!(student_t_two_tailed(t + dt, df) <= student_t_two_tailed(t, df) + 1e-12);
    }
}
