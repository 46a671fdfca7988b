//! Finite-difference check of [`Mlp::backward`] with the five-point stencil.

use super::Mlp;
use crate::error::Result;
use crate::linalg::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    /// Parameter index where the largest error occurred.
    pub worst_index: usize,
}

/// Gradients with magnitude below this are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-7;

/// Default stencil step.
pub const GRADCHECK_STEP: f64 = 1e-4;

fn loss(mlp: &Mlp, coords: &Matrix, targets: &Matrix) -> Result<f64> {
    let f = mlp.forward(coords)?;
    let r = f.sub(targets)?;
    Ok(0.5 * r.as_slice().iter().map(|v| v * v).sum::<f64>() / coords.rows() as f64)
}

/// Compares the analytic gradient of `(1/B) sum 1/2 |f(x_i) - y_i|^2`
/// against fourth-order central differences with step `h` on `per_layer` randomly chosen
/// weights and one bias of every layer.
pub fn check_gradients(
    mlp: &Mlp,
    coords: &Matrix,
    targets: &Matrix,
    per_layer: usize,
    h: f64,
    rng: &mut Rng,
) -> Result<GradCheck> {
    let f = mlp.forward(coords)?;
    let analytic = mlp.backward(coords, &f.sub(targets)?)?;
    let mut indices = Vec::new();
    for view in mlp.layers() {
        for _ in 0..per_layer {
            indices.push(view.weight_offset + rng.below(view.weight_len()));
        }
        indices.push(view.bias_offset + rng.below(view.fan_out));
    }
    let mut probe = mlp.clone();
    let mut out = GradCheck {
        checked: indices.len(),
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for &i in &indices {
        let orig = probe.params()[i];
        let mut at = |d: f64| -> Result<f64> {
            probe.params_mut()[i] = orig + d;
            loss(&probe, coords, targets)
        };
        let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
        probe.params_mut()[i] = orig;
        let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        if rel > out.max_rel_error {
            out.max_rel_error = rel;
            out.worst_index = i;
        }
    }
    Ok(out)
}
