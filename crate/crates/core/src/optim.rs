//! Parameter update rules.

use crate::error::Result;
use crate::model::Parameters;

/// `θ − lr · g`, elementwise.
pub fn sgd_step(params: &Parameters, grads: &Parameters, lr: f64) -> Result<Parameters> {
    params.zip_map(grads, |p, g| p - lr * g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Option<Parameters>,
    v: Option<Parameters>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState { config, step: 0, m: None, v: None }
    }
}

/// One bias-corrected Adam step. Returns the advanced state and the new
/// parameters; neither input is modified.
pub fn adam_step(
    state: &AdamState,
    params: &Parameters,
    grads: &Parameters,
    lr: f64,
) -> Result<(AdamState, Parameters)> {
    params.check_aligned(grads)?;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let zeros = params.zeros_like();
    let m_prev = state.m.as_ref().unwrap_or(&zeros);
    let v_prev = state.v.as_ref().unwrap_or(&zeros);
    let m = m_prev.zip_map(grads, |m, g| beta1 * m + (1.0 - beta1) * g)?;
    let v = v_prev.zip_map(grads, |v, g| beta2 * v + (1.0 - beta2) * g * g)?;
    let step = state.step + 1;
    let bc1 = 1.0 - libm::pow(beta1, step as f64);
    let bc2 = 1.0 - libm::pow(beta2, step as f64);
    let update = m.zip_map(&v, |m, v| (m / bc1) / (libm::sqrt(v / bc2) + eps))?;
    let next = params.zip_map(&update, |p, u| p - lr * u)?;
    Ok((AdamState { config: state.config, step, m: Some(m), v: Some(v) }, next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam(AdamConfig),
}

/// A stateful optimizer applying `lr`-scaled updates.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam(c) => Optimizer::Adam(AdamState::new(c)),
        }
    }

    pub fn step(&mut self, params: &Parameters, grads: &Parameters, lr: f64) -> Result<Parameters> {
        match self {
            Optimizer::Sgd => sgd_step(params, grads, lr),
            Optimizer::Adam(state) => {
                let (next_state, next) = adam_step(state, params, grads, lr)?;
                *state = next_state;
                Ok(next)
            }
        }
    }
}
