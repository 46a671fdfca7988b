use super::{fgd_step, DensityFunction};
use crate::error::{Error, Result};
use crate::kernels::{empirical_ntk, KernelMatrix};
use crate::linalg::Matrix;
use crate::nn::{Mlp, MlpArch, Workspace};

#[derive(Debug, Clone, PartialEq)]
pub struct PgdFgdConfig {
    pub steps: usize,
    /// Shared by both learners.
    pub lr: f64,
    pub seed: u64,
    pub log_every: usize,
    /// PGD step whose empirical NTK drives FGD; `None` means the last one.
    pub ntk_checkpoint: Option<usize>,
    /// PGD steps at which a copy of the network is kept.
    pub snapshot_steps: Vec<usize>,
}

impl PgdFgdConfig {
    pub fn new(steps: usize, lr: f64) -> Self {
        PgdFgdConfig {
            steps,
            lr,
            seed: 0,
            log_every: 1,
            ntk_checkpoint: None,
            snapshot_steps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PgdFgdReport {
    pub logged_steps: Vec<usize>,
    /// `max_i |f_PGD(x_i) - f_FGD(x_i)|` with both learners at the same step.
    pub gap: Vec<f64>,
    /// Gap between PGD at each logged step and the FGD iterate whose train
    /// MSE is closest to PGD's.
    pub matched_gap: Vec<f64>,
    pub matched_fgd_step: Vec<usize>,
    /// Mean of `(f - y)^2` over the grid.
    pub pgd_mse: Vec<f64>,
    pub fgd_mse: Vec<f64>,
    pub snapshots: Vec<(usize, Mlp)>,
    pub final_pgd: Mlp,
    pub final_fgd: DensityFunction,
    pub kernel: KernelMatrix,
}

impl PgdFgdReport {
    pub fn final_gap(&self) -> f64 {
        *self.gap.last().expect("at least step 0 is logged")
    }

    pub fn final_matched_gap(&self) -> f64 {
        *self.matched_gap.last().expect("at least step 0 is logged")
    }

    /// Matched gap at the first logged step where PGD's train MSE falls to
    /// `level`, with that step. `None` if PGD never gets there.
    pub fn matched_gap_at_loss(&self, level: f64) -> Option<(usize, f64)> {
        let i = self.pgd_mse.iter().position(|&m| m <= level)?;
        Some((self.logged_steps[i], self.matched_gap[i]))
    }
}

fn mse(f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / f.len() as f64
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Trains a network by full-batch gradient descent on the mean square loss
/// and, from the same initial outputs, a value table by functional gradient
/// descent under the network's empirical NTK frozen at a checkpoint.
pub fn pgd_fgd_compare(
    arch: MlpArch,
    coords: &Matrix,
    targets: &[f64],
    config: &PgdFgdConfig,
) -> Result<PgdFgdReport> {
    if arch.in_dim != 1 || arch.out_dim != 1 || coords.cols() != 1 {
        return Err(Error::invalid("PGD/FGD comparison needs a scalar 1D signal"));
    }
    if coords.rows() != targets.len() || targets.is_empty() {
        return Err(Error::invalid("coordinate and target counts differ"));
    }
    if !(config.lr > 0.0) || config.log_every == 0 {
        return Err(Error::invalid("lr and log_every must be positive"));
    }
    let ckpt = config.ntk_checkpoint.unwrap_or(config.steps);
    if ckpt > config.steps {
        return Err(Error::invalid("NTK checkpoint beyond the last step"));
    }
    let n = targets.len();
    let logged = |t: usize| t.is_multiple_of(config.log_every) || t == config.steps;

    let mut mlp = Mlp::init(arch, config.seed)?;
    let mut ws = Workspace::new();
    let mut grad = vec![0.0; mlp.param_count()];
    let mut r = vec![0.0; n];
    let mut pgd_outputs = Vec::new();
    let mut snapshots = Vec::new();
    let mut ntk_mlp = None;
    let mut f0 = Vec::new();

    for t in 0..=config.steps {
        let out = mlp.forward_into(coords.as_slice(), n, &mut ws)?;
        if t == 0 {
            f0 = out.to_vec();
        }
        if logged(t) {
            pgd_outputs.push((t, out.to_vec()));
        }
        if config.snapshot_steps.contains(&t) {
            snapshots.push((t, mlp.clone()));
        }
        if t == ckpt {
            ntk_mlp = Some(mlp.clone());
        }
        if t == config.steps {
            break;
        }
        for ((ri, fi), yi) in r.iter_mut().zip(out).zip(targets) {
            *ri = fi - yi;
        }
        grad.fill(0.0);
        mlp.backward_from(&mut ws, &r, 1.0 / n as f64, &mut grad)?;
        for (p, g) in mlp.params_mut().iter_mut().zip(&grad) {
            *p -= config.lr * g;
        }
    }

    let kernel = empirical_ntk(&ntk_mlp.expect("checkpoint reached"), coords)?;
    let mut f = DensityFunction::new(coords.clone(), f0)?;
    let mut fgd_all = Vec::with_capacity(config.steps + 1);
    fgd_all.push(f.values.clone());
    for _ in 0..config.steps {
        f = fgd_step(&f, targets, &kernel, config.lr)?;
        fgd_all.push(f.values.clone());
    }
    let fgd_mse_all: Vec<f64> = fgd_all.iter().map(|v| mse(v, targets)).collect();

    let mut report = PgdFgdReport {
        logged_steps: Vec::new(),
        gap: Vec::new(),
        matched_gap: Vec::new(),
        matched_fgd_step: Vec::new(),
        pgd_mse: Vec::new(),
        fgd_mse: Vec::new(),
        snapshots,
        final_pgd: mlp,
        final_fgd: f,
        kernel,
    };
    for (t, pgd) in &pgd_outputs {
        let loss = mse(pgd, targets);
        let s = fgd_mse_all
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - loss).abs().total_cmp(&(b.1 - loss).abs()))
            .map(|(s, _)| s)
            .expect("non-empty");
        report.logged_steps.push(*t);
        report.gap.push(max_gap(pgd, &fgd_all[*t]));
        report.matched_gap.push(max_gap(pgd, &fgd_all[s]));
        report.matched_fgd_step.push(s);
        report.pgd_mse.push(loss);
        report.fgd_mse.push(fgd_mse_all[*t]);
    }
    Ok(report)
}
