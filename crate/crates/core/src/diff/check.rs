use alloc::vec::Vec;

use super::{Graph, NodeId, Tensor};
use crate::error::{config_err, Result};

/// Denominator floor for the relative error, so coordinates whose true
/// derivative is (numerically) zero are compared on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub param: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub tolerance: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Checks `build` at `params` coordinate by coordinate.
///
/// `build` receives a fresh graph and one leaf per parameter tensor and
/// must return a one-element node. Each coordinate's numeric derivative is
/// `(f(θ + h·e_i) − f(θ − h·e_i)) / 2h`.
pub fn grad_check<F>(build: F, params: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(h > 0.0 && h <= 1e-2) {
        return Err(config_err("finite-difference step must lie in (0, 1e-2]"));
    }
    let eval = |values: &[Tensor]| -> Result<(Graph, Vec<NodeId>, NodeId)> {
        let mut g = Graph::new();
        let ids = values.iter().map(|t| g.leaf(t.clone())).collect::<Result<Vec<_>>>()?;
        let root = build(&mut g, &ids)?;
        Ok((g, ids, root))
    };

    let (graph, ids, root) = eval(params)?;
    let grads = graph.backward(root)?;

    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, coords_checked: 0, tolerance: tol, failures: Vec::new() };
    for (p, id) in ids.iter().enumerate() {
        for i in 0..params[p].numel() {
            let orig = params[p].data()[i];
            work[p].data_mut()[i] = orig + h;
            let (g, _, r) = eval(&work)?;
            let plus = g.value(r).item()?;
            work[p].data_mut()[i] = orig - h;
            let (g, _, r) = eval(&work)?;
            let minus = g.value(r).item()?;
            work[p].data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.get(*id).data()[i];
            let rel = relative_error(analytic, numeric);
            report.coords_checked += 1;
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel.is_nan() || rel > tol {
                report.failures.push(GradMismatch { param: p, coord: i, analytic, numeric, rel_error: rel });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn linear_function_is_exact() {
        let c = Tensor::vector(vec![0.5, -2.0, 3.0]);
        let theta = Tensor::vector(vec![1.0, 2.0, -1.0]);
        let report = grad_check(
            |g, p| {
                let cn = g.leaf(c.clone())?;
                let prod = g.mul(cn, p[0])?;
                g.sum(prod)
            },
            &[theta],
            1e-5,
            1e-10,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_rel_error < 1e-9);
    }

    #[test]
    fn quadratic_at_one() {
        // f(θ) = θ², f'(1) = 2
        let h = 1e-5;
        let f = |x: f64| x * x;
        let fd = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        assert!((fd - 2.0).abs() < 1e-8);
        let report = grad_check(|g, p| g.square(p[0]), &[Tensor::scalar(1.0)], h, 1e-6).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // relu at a kink: analytic 0 vs one-sided numeric 0.5
        let report = grad_check(
            |g, p| {
                let r = g.relu(p[0])?;
                g.sum(r)
            },
            &[Tensor::scalar(0.0)],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures[0].coord, 0);
    }

    #[test]
    fn rejects_bad_step() {
        let r = grad_check(|g, p| g.sum(p[0]), &[Tensor::scalar(1.0)], 0.5, 1e-4);
        assert!(r.is_err());
    }
}
