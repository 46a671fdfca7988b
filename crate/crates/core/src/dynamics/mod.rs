//! Functional gradient descent on dense points, the closed-form residual
//! dynamics `r(t) = exp(-lr K/N t) r(0)`, spectral tracking of residuals, and
//! a monitor for the sufficient-loss-reduction bound.

mod compare;

pub use compare::{pgd_fgd_compare, PgdFgdConfig, PgdFgdReport};

use crate::error::{Error, Result};
use crate::kernels::{CanonicalKernel, KernelMatrix};
use crate::linalg::{dot_unchecked, Matrix};

/// A nonparametric learner stored as its values on a fixed set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFunction {
    pub coords: Matrix,
    pub values: Vec<f64>,
}

impl DensityFunction {
    pub fn new(coords: Matrix, values: Vec<f64>) -> Result<Self> {
        if coords.rows() != values.len() {
            return Err(Error::invalid(format!(
                "{} points but {} values",
                coords.rows(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value"));
        }
        Ok(DensityFunction { coords, values })
    }

    pub fn residual(&self, targets: &[f64]) -> Result<Vec<f64>> {
        if targets.len() != self.values.len() {
            return Err(Error::invalid("target length mismatch"));
        }
        Ok(self.values.iter().zip(targets).map(|(f, y)| f - y).collect())
    }

    /// Off-grid value `sum_i a_i k(x_i, x)` of a kernel expansion over `coords`.
    pub fn expand_at(
        kernel: &CanonicalKernel,
        coords: &Matrix,
        coefficients: &[f64],
        x: &[f64],
    ) -> f64 {
        (0..coords.rows())
            .map(|i| coefficients[i] * kernel.eval(coords.row(i), x))
            .sum()
    }
}

/// One functional gradient step of the square loss evaluated at the dense
/// points: `f_j <- f_j - (lr/N) sum_i (f_i - y_i) K(x_i, x_j)`.
pub fn fgd_step(
    f: &DensityFunction,
    targets: &[f64],
    kernel: &KernelMatrix,
    lr: f64,
) -> Result<DensityFunction> {
    let n = f.values.len();
    if kernel.n() != n {
        return Err(Error::invalid(format!(
            "kernel is {}x{}, function has {n} points",
            kernel.n(),
            kernel.n()
        )));
    }
    let r = f.residual(targets)?;
    // K symmetric, so column j of K is row j
    let values = (0..n)
        .map(|j| f.values[j] - lr / n as f64 * dot_unchecked(kernel.k.row(j), &r))
        .collect();
    Ok(DensityFunction {
        coords: f.coords.clone(),
        values,
    })
}

/// `exp(-lr * K/N * t) r0`.
pub fn closed_form_residual(kernel: &KernelMatrix, r0: &[f64], lr: f64, t: f64) -> Result<Vec<f64>> {
    if r0.len() != kernel.n() {
        return Err(Error::invalid("residual length does not match kernel"));
    }
    if r0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite residual"));
    }
    kernel.eig.expm_apply(-lr * t, r0)
}

/// Single fixed input: `f_t = f* - exp(-lr K(x,x) t) (f* - f_0)`.
pub fn single_input_closed_form(k_xx: f64, f0: f64, fstar: f64, lr: f64, t: f64) -> Result<f64> {
    if !(k_xx > 0.0) {
        return Err(Error::invalid(format!("K(x,x) must be positive, got {k_xx}")));
    }
    Ok(fstar - (-lr * k_xx * t).exp() * (fstar - f0))
}

/// Residuals over time and their coordinates in the kernel eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrajectory {
    pub times: Vec<f64>,
    pub residual_vectors: Vec<Vec<f64>>,
    /// `V^T r_t` for each recorded time.
    pub projections: Vec<Vec<f64>>,
    /// Eigenvalues of `K/N`, descending.
    pub eigenvalues: Vec<f64>,
    /// Fitted exponential decay rate per component, `None` where fewer than
    /// two usable points remain.
    pub decay_rates: Vec<Option<f64>>,
}

impl ResidualTrajectory {
    /// Projection predicted by the spectral decay law:
    /// `exp(-lr lambda_i (t - t_0)) p_i(t_0)`.
    pub fn predicted(&self, lr: f64, step: usize, component: usize) -> f64 {
        let t0 = self.times[0];
        let p0 = self.projections[0][component];
        (-lr * self.eigenvalues[component] * (self.times[step] - t0)).exp() * p0
    }

    /// CSV with columns `step,component_index,projection,predicted_projection`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, lr: f64) -> std::io::Result<()> {
        writeln!(w, "step,component_index,projection,predicted_projection")?;
        for (s, proj) in self.projections.iter().enumerate() {
            for (c, p) in proj.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{:e},{:e}",
                    self.times[s],
                    c,
                    p,
                    self.predicted(lr, s, c)
                )?;
            }
        }
        Ok(())
    }
}

/// Magnitudes at or below this are excluded from decay fitting.
pub const DECAY_FIT_FLOOR: f64 = 1e-10;

/// Projects every residual in `history` (pairs of time and residual) onto the
/// eigenvectors of `K/N` and fits a per-component decay rate by least
/// squares on `ln |p_i(t)|`, skipping the first 10% of entries.
pub fn spectral_track(
    kernel: &KernelMatrix,
    history: &[(f64, Vec<f64>)],
) -> Result<ResidualTrajectory> {
    if history.is_empty() {
        return Err(Error::invalid("residual history is empty"));
    }
    let n = kernel.n();
    let mut times = Vec::with_capacity(history.len());
    let mut residual_vectors = Vec::with_capacity(history.len());
    let mut projections = Vec::with_capacity(history.len());
    for (t, r) in history {
        if r.len() != n {
            return Err(Error::invalid("residual length does not match kernel"));
        }
        times.push(*t);
        projections.push(kernel.eig.project(r)?);
        residual_vectors.push(r.clone());
    }

    let skip = history.len() / 10;
    let decay_rates = (0..n)
        .map(|c| {
            let pts: Vec<(f64, f64)> = times
                .iter()
                .zip(&projections)
                .skip(skip)
                .filter(|(_, p)| p[c].abs() > DECAY_FIT_FLOOR)
                .map(|(&t, p)| (t, p[c].abs().ln()))
                .collect();
            least_squares_slope(&pts).map(|s| -s)
        })
        .collect();

    Ok(ResidualTrajectory {
        times,
        residual_vectors,
        projections,
        eigenvalues: kernel.eig.eigenvalues.clone(),
        decay_rates,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Which pointwise loss a recorded run used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `1/2 (f - y)^2`
    Square,
    /// `|f - y|`
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStep {
    pub loss_before: f64,
    pub loss_after: f64,
    /// `-(lr zeta / 2) (mean residual)^2`, the largest allowed change.
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReductionReport {
    pub per_step: Vec<LossStep>,
    /// `lr > 1/(2 xi zeta)`: the bound is recorded but not promised.
    pub precondition_violated: bool,
    pub tol: f64,
}

impl LossReductionReport {
    /// True when the step-size condition holds and every step met the bound.
    pub fn holds(&self) -> bool {
        !self.precondition_violated && self.per_step.iter().all(|s| s.satisfied)
    }

    pub fn violations(&self) -> usize {
        self.per_step.iter().filter(|s| !s.satisfied).count()
    }
}

/// Lipschitz-smoothness constant of the square loss.
pub const SQUARE_LOSS_SMOOTHNESS: f64 = 1.0;

/// Mean square loss `(1/N) sum 1/2 r_i^2`.
pub fn mean_square_loss(residual: &[f64]) -> f64 {
    if residual.is_empty() {
        return 0.0;
    }
    0.5 * residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64
}

/// Checks each consecutive pair of residuals in `residuals` against
/// `L_t - L_{t+1} >= (lr zeta / 2) (mean residual_t)^2 - tol`.
///
/// Violations are recorded, never raised: the bound is a continuous-time
/// statement and discrete steps only approximate it.
pub fn loss_reduction_monitor(
    loss: LossKind,
    residuals: &[Vec<f64>],
    lr: f64,
    zeta: f64,
    tol: f64,
) -> Result<LossReductionReport> {
    if loss != LossKind::Square {
        return Err(Error::Unsupported(
            "loss-reduction monitor is implemented for the square loss only".into(),
        ));
    }
    if !(zeta > 0.0) {
        return Err(Error::invalid("kernel bound zeta must be positive"));
    }
    let precondition_violated = lr > 1.0 / (2.0 * SQUARE_LOSS_SMOOTHNESS * zeta);
    let per_step = residuals
        .windows(2)
        .map(|w| {
            let before = mean_square_loss(&w[0]);
            let after = mean_square_loss(&w[1]);
            let mean = if w[0].is_empty() {
                0.0
            } else {
                w[0].iter().sum::<f64>() / w[0].len() as f64
            };
            let bound = -(lr * zeta / 2.0) * mean * mean;
            LossStep {
                loss_before: before,
                loss_after: after,
                bound,
                satisfied: after - before <= bound + tol,
            }
        })
        .collect();
    Ok(LossReductionReport {
        per_step,
        precondition_violated,
        tol,
    })
}

/// Runs `steps` FGD steps and returns the residual after every step,
/// starting with the initial one.
pub fn fgd_residual_history(
    f0: &DensityFunction,
    targets: &[f64],
    kernel: &KernelMatrix,
    lr: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut f = f0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(f.residual(targets)?);
    for _ in 0..steps {
        f = fgd_step(&f, targets, kernel, lr)?;
        out.push(f.residual(targets)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use std::f64::consts::SQRT_2;

    fn two_point_kernel() -> KernelMatrix {
        // K = N * Kbar with Kbar = [[0.5, 0.25], [0.25, 0.5]]
        KernelMatrix::from_gram(Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap())
            .unwrap()
    }

    fn two_points() -> Matrix {
        Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn fgd_fixed_point_at_target() {
        let f = DensityFunction::new(two_points(), vec![0.3, -0.2]).unwrap();
        let g = fgd_step(&f, &[0.3, -0.2], &two_point_kernel(), 0.5).unwrap();
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn fgd_single_point_contracts_by_one_minus_lr() {
        let k = KernelMatrix::from_gram(Matrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        let f = DensityFunction::new(Matrix::zeros(1, 1), vec![2.0]).unwrap();
        let g = fgd_step(&f, &[0.0], &k, 0.1).unwrap();
        assert!((g.values[0] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn fgd_two_point_hand_step() {
        // r = (1, 0.5); K r = (1.25, 1.0); lr/N = 0.05
        let f = DensityFunction::new(two_points(), vec![1.0, 0.5]).unwrap();
        let g = fgd_step(&f, &[0.0, 0.0], &two_point_kernel(), 0.1).unwrap();
        assert!((g.values[0] - (1.0 - 0.05 * 1.25)).abs() < 1e-15);
        assert!((g.values[1] - (0.5 - 0.05 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_at_zero_is_identity() {
        let r = closed_form_residual(&two_point_kernel(), &[1.0, 0.5], 0.3, 0.0).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_components_decay_at_eigen_rates() {
        let k = two_point_kernel();
        let (lr, t) = (0.7, 2.0);
        let r = closed_form_residual(&k, &[1.0, 0.5], lr, t).unwrap();
        let p = k.eig.project(&r).unwrap();
        let p1 = 3.0 * SQRT_2 / 4.0 * (-0.75 * lr * t).exp();
        let p2 = -SQRT_2 / 4.0 * (-0.25 * lr * t).exp();
        assert!((p[0] - p1).abs() < 1e-14);
        assert!((p[1] - p2).abs() < 1e-14);
    }

    #[test]
    fn single_input_limits() {
        assert!((single_input_closed_form(2.0, 0.3, 1.0, 0.5, 0.0).unwrap() - 0.3).abs() < 1e-15);
        assert!((single_input_closed_form(2.0, 0.3, 1.0, 0.5, 1e6).unwrap() - 1.0).abs() < 1e-12);
        assert!(single_input_closed_form(0.0, 0.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn single_input_matches_one_point_closed_form() {
        let kxx = 1.7;
        let k = KernelMatrix::from_gram(Matrix::from_rows(&[vec![kxx]]).unwrap()).unwrap();
        let (f0, fstar, lr, t) = (0.2, -0.4, 0.3, 3.5);
        let r = closed_form_residual(&k, &[f0 - fstar], lr, t).unwrap();
        let f = single_input_closed_form(kxx, f0, fstar, lr, t).unwrap();
        assert!((r[0] + fstar - f).abs() < 1e-12);
    }

    #[test]
    fn constant_history_has_zero_rates() {
        let k = two_point_kernel();
        let hist: Vec<(f64, Vec<f64>)> = (0..20).map(|t| (t as f64, vec![1.0, 0.5])).collect();
        let tr = spectral_track(&k, &hist).unwrap();
        for r in &tr.decay_rates {
            assert!(r.unwrap().abs() < 1e-14);
        }
        assert!((tr.projections[0][0] - 3.0 * SQRT_2 / 4.0).abs() < 1e-15);
        assert!((tr.projections[0][1] + SQRT_2 / 4.0).abs() < 1e-15);
        assert!(spectral_track(&k, &[]).is_err());
    }

    #[test]
    fn closed_form_history_recovers_rates() {
        let k = two_point_kernel();
        let lr = 0.4;
        let hist: Vec<(f64, Vec<f64>)> = (0..50)
            .map(|s| {
                let t = s as f64 * 0.5;
                (t, closed_form_residual(&k, &[1.0, 0.5], lr, t).unwrap())
            })
            .collect();
        let tr = spectral_track(&k, &hist).unwrap();
        for (rate, lam) in tr.decay_rates.iter().zip(&k.eig.eigenvalues) {
            let want = lr * lam;
            assert!((rate.unwrap() - want).abs() <= 0.02 * want);
        }
        // projections follow D^t V^T r_0 to machine precision
        for s in 0..hist.len() {
            for c in 0..2 {
                assert!((tr.projections[s][c] - tr.predicted(lr, s, c)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn monitor_gating_and_trivial_cases() {
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let rep = loss_reduction_monitor(LossKind::Square, &zero, 0.1, 1.0, 0.0).unwrap();
        assert_eq!(rep.per_step[0].bound, 0.0);
        assert!(rep.holds());

        let rep = loss_reduction_monitor(LossKind::Square, &zero, 0.6, 1.0, 0.0).unwrap();
        assert!(rep.precondition_violated);
        assert!(!rep.holds());

        assert!(matches!(
            loss_reduction_monitor(LossKind::Absolute, &zero, 0.1, 1.0, 0.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fgd_on_worked_example_meets_loss_bound() {
        let k = two_point_kernel();
        let f = DensityFunction::new(two_points(), vec![1.0, 0.5]).unwrap();
        let hist = fgd_residual_history(&f, &[0.0, 0.0], &k, 0.01, 200).unwrap();
        let rep =
            loss_reduction_monitor(LossKind::Square, &hist, 0.01, k.bound(), 1e-9).unwrap();
        assert!(rep.holds());
        // and the residual norm never grows
        assert!(hist.windows(2).all(|w| norm2(&w[1]) <= norm2(&w[0])));
    }
}
