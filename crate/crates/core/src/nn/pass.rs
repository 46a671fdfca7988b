use std::f64::consts::TAU;

use super::fastmath::{sin_cos_scaled, sine_layer};
use super::gemm;
use super::{Activation, Mlp, TangentModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Reusable buffers for batched forward/backward passes.
///
/// After [`Mlp::forward_into`] the workspace holds every layer input and
/// activation derivative for that batch, which [`Mlp::backward_from`]
/// consumes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    rows: usize,
    // inputs[l]: rows x fan_in(l), the vector entering linear layer l
    inputs: Vec<Vec<f64>>,
    // derivs[l]: rows x fan_out(l), activation derivative of hidden layer l
    derivs: Vec<Vec<f64>>,
    out: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Output of the last forward pass, `rows x out_dim`.
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

/// Per-example backpropagated signal for one linear layer, for a
/// scalar-output network: `d f(x_i) / d W_l = delta_i (x) input_i` and
/// `d f(x_i) / d b_l = delta_i`.
#[derive(Debug, Clone)]
pub struct LayerTangent {
    pub delta: Matrix,
    pub input: Matrix,
}

// Contents are left stale; every caller overwrites the whole buffer.
fn resize(buf: &mut Vec<f64>, len: usize) {
    buf.resize(len, 0.0);
}

impl Mlp {
    fn check_coords(&self, coords: &[f64], rows: usize) -> Result<()> {
        let d = self.arch().in_dim;
        if coords.len() != rows * d {
            return Err(Error::invalid(format!(
                "expected {rows} coordinates of dimension {d}, got {} values",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(())
    }

    fn encode(&self, coords: &[f64], rows: usize, ws: &mut Workspace) {
        let mut input = std::mem::take(&mut ws.inputs[0]);
        match self.fourier() {
            None => {
                input.clear();
                input.extend_from_slice(coords);
            }
            Some(basis) => {
                let f = basis.b_matrix.rows();
                let d = basis.b_matrix.cols();
                resize(&mut ws.scratch, rows * f);
                gemm::a_bt(rows, d, f, coords, basis.b_matrix.as_slice(), &mut ws.scratch);
                let mut cos = vec![0.0; rows * f];
                let mut sin = vec![0.0; rows * f];
                sin_cos_scaled(TAU, &ws.scratch, &mut sin, &mut cos);
                resize(&mut input, rows * 2 * f);
                for r in 0..rows {
                    let row = &mut input[r * 2 * f..(r + 1) * 2 * f];
                    row[..f].copy_from_slice(&cos[r * f..(r + 1) * f]);
                    row[f..].copy_from_slice(&sin[r * f..(r + 1) * f]);
                }
            }
        }
        ws.inputs[0] = input;
    }

    /// Batched forward pass over `rows` coordinates stored row-major in
    /// `coords`. Keeps what the backward pass needs in `ws`.
    pub fn forward_into<'w>(
        &self,
        coords: &[f64],
        rows: usize,
        ws: &'w mut Workspace,
    ) -> Result<&'w [f64]> {
        self.check_coords(coords, rows)?;
        let depth = self.layers().len();
        ws.rows = rows;
        ws.inputs.resize_with(depth, Vec::new);
        ws.derivs.resize_with(depth - 1, Vec::new);
        self.encode(coords, rows, ws);

        for l in 0..depth {
            let view = self.layers()[l];
            let (din, dout) = (view.fan_in, view.fan_out);
            let mut pre = std::mem::take(&mut ws.scratch);
            resize(&mut pre, rows * dout);
            gemm::a_bt(rows, din, dout, &ws.inputs[l], self.weight(l), &mut pre);
            let bias = self.bias(l);
            let sine = matches!(self.arch().activation, Activation::Sine { .. });
            if l + 1 == depth || !sine {
                for row in pre.chunks_exact_mut(dout) {
                    for (z, b) in row.iter_mut().zip(bias) {
                        *z += b;
                    }
                }
            }

            if l + 1 == depth {
                std::mem::swap(&mut ws.out, &mut pre);
            } else {
                let mut act = std::mem::take(&mut ws.inputs[l + 1]);
                let mut der = std::mem::take(&mut ws.derivs[l]);
                resize(&mut act, rows * dout);
                resize(&mut der, rows * dout);
                match self.arch().activation {
                    Activation::Sine { omega0 } => {
                        sine_layer(omega0, &pre, bias, &mut act, &mut der);
                    }
                    Activation::Relu => {
                        for ((a, d), &z) in act.iter_mut().zip(der.iter_mut()).zip(&pre) {
                            let on = z > 0.0;
                            *a = if on { z } else { 0.0 };
                            *d = if on { 1.0 } else { 0.0 };
                        }
                    }
                    Activation::Identity => {
                        act.copy_from_slice(&pre);
                        der.fill(1.0);
                    }
                }
                ws.inputs[l + 1] = act;
                ws.derivs[l] = der;
            }
            ws.scratch = pre;
        }
        Ok(&ws.out)
    }

    /// Accumulates `scale * sum_i dl_df_i . d f(x_i) / d theta` into `grad`,
    /// using the batch of the preceding [`forward_into`](Self::forward_into).
    pub fn backward_from(
        &self,
        ws: &mut Workspace,
        dl_df: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        self.backprop(ws, dl_df, scale, grad, |_, _, _| {})
    }

    fn backprop(
        &self,
        ws: &mut Workspace,
        dl_df: &[f64],
        scale: f64,
        grad: &mut [f64],
        mut on_layer: impl FnMut(usize, &[f64], &[f64]),
    ) -> Result<()> {
        let rows = ws.rows;
        let out_dim = self.arch().out_dim;
        if dl_df.len() != rows * out_dim {
            return Err(Error::invalid(format!(
                "dL/df has {} values, expected {rows} x {out_dim}",
                dl_df.len()
            )));
        }
        if grad.len() != self.param_count() {
            return Err(Error::invalid("gradient buffer length != param_count"));
        }
        let mut delta = std::mem::take(&mut ws.delta);
        let mut prev = std::mem::take(&mut ws.delta_prev);
        delta.clear();
        delta.extend(dl_df.iter().map(|g| g * scale));

        for l in (0..self.layers().len()).rev() {
            let view = self.layers()[l];
            let (din, dout) = (view.fan_in, view.fan_out);
            on_layer(l, &delta, &ws.inputs[l]);
            let gw = &mut grad[view.weight_offset..view.weight_offset + view.weight_len()];
            gemm::at_b_acc(dout, rows, din, &delta, &ws.inputs[l], gw);
            let gb = &mut grad[view.bias_offset..view.bias_offset + dout];
            for row in delta.chunks_exact(dout) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                resize(&mut prev, rows * din);
                gemm::a_b(rows, dout, din, &delta, self.weight(l), &mut prev);
                for (p, d) in prev.iter_mut().zip(&ws.derivs[l - 1]) {
                    *p *= d;
                }
                std::mem::swap(&mut delta, &mut prev);
            }
        }
        ws.delta = delta;
        ws.delta_prev = prev;
        Ok(())
    }

    /// Evaluates the network on a batch (`rows x in_dim`).
    pub fn forward(&self, coords: &Matrix) -> Result<Matrix> {
        if coords.cols() != self.arch().in_dim {
            return Err(Error::invalid(format!(
                "coordinates have dimension {}, network expects {}",
                coords.cols(),
                self.arch().in_dim
            )));
        }
        let mut ws = Workspace::new();
        let out = self.forward_into(coords.as_slice(), coords.rows(), &mut ws)?;
        Matrix::from_vec(coords.rows(), self.arch().out_dim, out.to_vec())
            .map_err(|_| Error::invalid("network produced a non-finite output"))
    }

    /// Batch-averaged parameter gradient `(1/B) sum_i dl_df_i . d f(x_i)/d theta`.
    pub fn backward(&self, coords: &Matrix, dl_df: &Matrix) -> Result<Vec<f64>> {
        if dl_df.rows() != coords.rows() || dl_df.cols() != self.arch().out_dim {
            return Err(Error::invalid(format!(
                "dL/df is {}x{}, expected {}x{}",
                dl_df.rows(),
                dl_df.cols(),
                coords.rows(),
                self.arch().out_dim
            )));
        }
        if coords.cols() != self.arch().in_dim {
            return Err(Error::invalid("coordinate dimension mismatch"));
        }
        let mut ws = Workspace::new();
        self.forward_into(coords.as_slice(), coords.rows(), &mut ws)?;
        let mut grad = vec![0.0; self.param_count()];
        if coords.rows() == 0 {
            return Ok(grad);
        }
        let scale = 1.0 / coords.rows() as f64;
        self.backward_from(&mut ws, dl_df.as_slice(), scale, &mut grad)?;
        Ok(grad)
    }

    /// Per-layer tangent factors for a scalar-output network.
    pub fn layer_tangents(&self, coords: &Matrix) -> Result<Vec<LayerTangent>> {
        if self.arch().out_dim != 1 {
            return Err(Error::Unsupported(
                "layer tangents need a scalar-output network".into(),
            ));
        }
        let rows = coords.rows();
        let mut ws = Workspace::new();
        self.forward_into(coords.as_slice(), rows, &mut ws)?;
        let ones = vec![1.0; rows];
        let mut sink = vec![0.0; self.param_count()];
        let mut tangents: Vec<Option<LayerTangent>> = vec![None; self.layers().len()];
        self.backprop(&mut ws, &ones, 1.0, &mut sink, |l, delta, input| {
            let view = self.layers()[l];
            tangents[l] = Some(LayerTangent {
                delta: Matrix::from_vec(rows, view.fan_out, delta.to_vec())
                    .unwrap_or_else(|_| Matrix::zeros(rows, view.fan_out)),
                input: Matrix::from_vec(rows, view.fan_in, input.to_vec())
                    .unwrap_or_else(|_| Matrix::zeros(rows, view.fan_in)),
            });
        })?;
        Ok(tangents.into_iter().map(|t| t.expect("every layer visited")).collect())
    }
}

impl TangentModel for Mlp {
    fn in_dim(&self) -> usize {
        self.arch().in_dim
    }

    fn out_dim(&self) -> usize {
        self.arch().out_dim
    }

    fn param_count(&self) -> usize {
        Mlp::param_count(self)
    }

    fn per_example_jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut ws = Workspace::new();
        self.forward_into(x, 1, &mut ws)?;
        let out_dim = self.arch().out_dim;
        (0..out_dim)
            .map(|c| {
                let mut onehot = vec![0.0; out_dim];
                onehot[c] = 1.0;
                let mut g = vec![0.0; self.param_count()];
                self.backward_from(&mut ws, &onehot, 1.0, &mut g)?;
                Ok(g)
            })
            .collect()
    }

    /// `K = sum_l (D_l D_l^T) o (H_l H_l^T + 1)`: the tangent Gram matrix
    /// from per-layer factors, without materializing any Jacobian.
    fn tangent_gram(&self, coords: &Matrix) -> Result<Matrix> {
        let n = coords.rows();
        let mut k = Matrix::zeros(n, n);
        let mut dd = vec![0.0; n * n];
        let mut hh = vec![0.0; n * n];
        for t in self.layer_tangents(coords)? {
            gemm::a_bt(n, t.delta.cols(), n, t.delta.as_slice(), t.delta.as_slice(), &mut dd);
            gemm::a_bt(n, t.input.cols(), n, t.input.as_slice(), t.input.as_slice(), &mut hh);
            for (kij, (d, h)) in k.as_mut_slice().iter_mut().zip(dd.iter().zip(&hh)) {
                *kij += d * (h + 1.0);
            }
        }
        k.mirror_upper();
        Ok(k)
    }
}
