//! Residual-driven example selection and its schedules.

mod schedule;
mod train;

pub use schedule::{interval_at, ratio_at, stage_of, IntervalSchedule, RatioSchedule};
pub use train::{int_train, RefreshEvent, RunLog, RunLogRow, TrainOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Mlp, Workspace};

/// Rows per forward pass when refreshing residuals.
pub const REFRESH_CHUNK: usize = 8192;

/// Training coordinates, targets, and per-example residual norms as of the
/// last refresh.
#[derive(Debug, Clone, PartialEq)]
pub struct TeachingSet {
    pub coords: Matrix,
    pub targets: Matrix,
    pub residual_norms: Vec<f64>,
    pub last_refresh_step: usize,
}

impl TeachingSet {
    pub fn new(coords: Matrix, targets: Matrix) -> Result<Self> {
        if coords.rows() != targets.rows() {
            return Err(Error::invalid(format!(
                "{} coordinates but {} targets",
                coords.rows(),
                targets.rows()
            )));
        }
        if coords.rows() == 0 {
            return Err(Error::invalid("teaching set is empty"));
        }
        let n = coords.rows();
        Ok(TeachingSet {
            coords,
            targets,
            residual_norms: vec![f64::INFINITY; n],
            last_refresh_step: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    /// `sqrt(sum_i |r_i|^2)` over the stored residual norms.
    pub fn total_residual(&self) -> f64 {
        self.residual_norms.iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    fn store_residuals(&mut self, indices: impl Iterator<Item = usize>, outputs: &[f64]) {
        let c = self.targets.cols();
        for (i, out) in indices.zip(outputs.chunks_exact(c)) {
            let y = self.targets.row(i);
            self.residual_norms[i] = out
                .iter()
                .zip(y)
                .map(|(f, t)| (f - t) * (f - t))
                .sum::<f64>()
                .sqrt();
        }
    }
}

/// How the teacher picks examples at a refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The `k` largest residuals.
    #[default]
    TopK,
    /// `k` examples uniformly at random; a control for top-k.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntConfig {
    pub ratio: RatioSchedule,
    pub interval: IntervalSchedule,
    /// Draw a minibatch per step and select within it.
    #[serde(default)]
    pub minibatch_size: Option<usize>,
    #[serde(default)]
    pub selection: Selection,
}

impl IntConfig {
    /// Every example at every step: plain full-batch training.
    pub fn full_batch() -> Self {
        IntConfig {
            ratio: RatioSchedule::Constant { r: 1.0 },
            interval: IntervalSchedule::Dense,
            minibatch_size: None,
            selection: Selection::TopK,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.ratio.validate()?;
        self.interval.validate()?;
        if let Some(b) = self.minibatch_size {
            if b == 0 || b > n {
                return Err(Error::invalid(format!("minibatch size {b} not in 1..={n}")));
            }
        }
        Ok(())
    }
}

/// `ceil(ratio * n)`, at least 1 and at most `n`.
pub fn k_from_ratio(ratio: f64, n: usize) -> usize {
    // guard against 0.3 * 10 = 3.0000000000000004
    let raw = ratio * n as f64;
    let k = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, n.max(1))
}

/// Indices of the `k` largest entries of `residuals`, ties to the lower
/// index, returned in ascending index order.
pub fn select_topk_of(residuals: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = residuals.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} not in 1..={n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        let cmp = |a: &usize, b: &usize| {
            residuals[*b]
                .total_cmp(&residuals[*a])
                .then_with(|| a.cmp(b))
        };
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable();
    Ok(idx)
}

pub fn select_topk(ts: &TeachingSet, k: usize) -> Result<Vec<usize>> {
    select_topk_of(&ts.residual_norms, k)
}

/// Recomputes every residual norm with forward passes over `mlp`.
pub fn refresh_residuals(ts: &mut TeachingSet, mlp: &Mlp, step: usize) -> Result<()> {
    let mut ws = Workspace::new();
    refresh_with(ts, mlp, step, &mut ws)
}

pub(crate) fn refresh_with(
    ts: &mut TeachingSet,
    mlp: &Mlp,
    step: usize,
    ws: &mut Workspace,
) -> Result<()> {
    if ts.targets.cols() != mlp.arch().out_dim {
        return Err(Error::invalid("target channels do not match network outputs"));
    }
    let n = ts.len();
    let d = ts.coords.cols();
    let mut start = 0;
    while start < n {
        let end = (start + REFRESH_CHUNK).min(n);
        let block = &ts.coords.as_slice()[start * d..end * d];
        let out = mlp.forward_into(block, end - start, ws)?.to_vec();
        ts.store_residuals(start..end, &out);
        start = end;
    }
    ts.last_refresh_step = step;
    Ok(())
}
