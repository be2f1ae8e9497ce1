//! Welch's two-sample t-test with Student-t tails by adaptive quadrature.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-tailed p-value.
    pub p_value: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n − 1) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Unbiased sample standard deviation; zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        libm::sqrt(sample_variance(xs))
    }
}

/// Unequal-variance two-sample t-test.
///
/// Needs at least two values per sample and a non-zero pooled standard
/// error (at least one sample must vary).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateSample("each sample needs at least two values"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample("non-finite value"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::DegenerateSample("both samples have zero variance"));
    }
    let t = (mean(a) - mean(b)) / libm::sqrt(se2);
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchTest { t, df, p_value: student_t_two_tailed(t, df) })
}

pub fn t_test_two_tailed(a: &[f64], b: &[f64]) -> Result<f64> {
    welch_t_test(a, b).map(|w| w.p_value)
}

pub fn student_t_pdf(x: f64, df: f64) -> f64 {
    libm::exp(log_norm_const(df) - 0.5 * (df + 1.0) * libm::log1p(x * x / df))
}

fn log_norm_const(df: f64) -> f64 {
    libm::lgamma(0.5 * (df + 1.0)) - libm::lgamma(0.5 * df) - 0.5 * libm::log(df * core::f64::consts::PI)
}

const QUAD_TOL: f64 = 1e-13;

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    let x = t.abs();
    let upper_tail = if x <= 1.0 || df < 1.0 {
        0.5 - integrate(|s| student_t_pdf(s, df), 0.0, x, QUAD_TOL)
    } else {
        // x = 1/s maps [|t|, ∞) onto (0, 1/|t|]; the integrand
        // c · s^(ν−1) · (s² + 1/ν)^(−(ν+1)/2) is bounded for ν >= 1.
        let c = log_norm_const(df);
        let integrand = |s: f64| libm::exp(c) * libm::pow(s, df - 1.0) * libm::pow(s * s + 1.0 / df, -0.5 * (df + 1.0));
        integrate(integrand, 0.0, 1.0 / x, QUAD_TOL)
    };
    (2.0 * upper_tail).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
