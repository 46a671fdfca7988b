//! Plain gradient descent, Adam, and the cosine-annealed learning rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdState {
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(lr: f64, param_count: usize) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step_count: 0,
        }
    }
}

fn check_grad(mlp: &Mlp, grad: &[f64]) -> Result<()> {
    if grad.len() != mlp.param_count() {
        return Err(Error::invalid(format!(
            "gradient has {} entries, network has {} parameters",
            grad.len(),
            mlp.param_count()
        )));
    }
    Ok(())
}

/// `theta <- theta - lr * grad`.
pub fn sgd_step(mlp: &mut Mlp, grad: &[f64], lr: f64) -> Result<()> {
    check_grad(mlp, grad)?;
    for (p, g) in mlp.params_mut().iter_mut().zip(grad) {
        *p -= lr * g;
    }
    Ok(())
}

/// Bias-corrected Adam update using `state.lr`.
pub fn adam_step(state: &mut AdamState, mlp: &mut Mlp, grad: &[f64]) -> Result<()> {
    check_grad(mlp, grad)?;
    if state.m.len() != grad.len() || state.v.len() != grad.len() {
        return Err(Error::invalid("Adam moment buffers do not match parameter count"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let lr = state.lr;
    let eps = state.eps;
    for (((p, &g), m), v) in mlp
        .params_mut()
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Either optimizer behind one interface; the learning rate is supplied per
/// step so a schedule can drive it.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd(SgdState),
    Adam(AdamState),
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd(SgdState { lr })
    }

    pub fn adam(lr: f64, param_count: usize) -> Self {
        Optimizer::Adam(AdamState::new(lr, param_count))
    }

    pub fn base_lr(&self) -> f64 {
        match self {
            Optimizer::Sgd(s) => s.lr,
            Optimizer::Adam(a) => a.lr,
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grad: &[f64], lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd(s) => {
                s.lr = lr;
                sgd_step(mlp, grad, lr)
            }
            Optimizer::Adam(a) => {
                a.lr = lr;
                adam_step(a, mlp, grad)
            }
        }
    }
}

/// Cosine annealing from `lr_start` down to `lr_min` over `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineLr {
    pub lr_start: f64,
    pub lr_min: f64,
    pub total_steps: usize,
}

impl CosineLr {
    pub fn new(lr_start: f64, lr_min: f64, total_steps: usize) -> Result<Self> {
        if !(lr_min <= lr_start) || total_steps == 0 {
            return Err(Error::invalid(format!(
                "cosine schedule needs lr_min <= lr_start and total_steps >= 1 \
                 (got {lr_min}, {lr_start}, {total_steps})"
            )));
        }
        Ok(CosineLr {
            lr_start,
            lr_min,
            total_steps,
        })
    }

    /// Constant learning rate expressed as a degenerate schedule.
    pub fn constant(lr: f64, total_steps: usize) -> Self {
        CosineLr {
            lr_start: lr,
            lr_min: lr,
            total_steps: total_steps.max(1),
        }
    }
}

pub fn cosine_lr(sched: &CosineLr, step: usize) -> Result<f64> {
    if step > sched.total_steps {
        return Err(Error::invalid(format!(
            "step {step} outside 0..={}",
            sched.total_steps
        )));
    }
    let frac = step as f64 / sched.total_steps as f64;
    Ok(sched.lr_min
        + 0.5 * (sched.lr_start - sched.lr_min) * (1.0 + (std::f64::consts::PI * frac).cos()))
}
