//! Self-checks of the theory code: each suite runs small property checks
//! and reports one line per property.

use std::f64::consts::{PI, SQRT_2};

use clap::ValueEnum;

use crate::dynamics::{
    closed_form_residual, fgd_residual_history, fgd_step, loss_reduction_monitor,
    pgd_fgd_compare, spectral_track, DensityFunction, LossKind, PgdFgdConfig,
};
use crate::error::Result;
use crate::kernels::{gram, ntk_drift, CanonicalKernel, KernelMatrix};
use crate::linalg::{norm2, Matrix, Rng};
use crate::nn::{check_gradients, Mlp, MlpArch, GRADCHECK_STEP};
use crate::signals::sine_samples;
use crate::teaching::select_topk_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Gradients,
    OdeClosedForm,
    Spectral,
    NtkDrift,
    PgdFgd,
    LossBound,
    TopkOracle,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}::{} ({})", self.suite, self.name, self.detail)
    }
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Recorder {
            suite,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            suite: self.suite,
            name: name.into(),
            passed,
            detail,
        });
    }
}

/// Gram matrix of random unit vectors, so the diagonal is 1.
fn random_psd(n: usize, rng: &mut Rng) -> Result<KernelMatrix> {
    let mut a = Matrix::from_fn(n, n + 2, |_, _| rng.normal());
    for i in 0..n {
        let norm = norm2(a.row(i));
        a.row_mut(i).iter_mut().for_each(|v| *v /= norm);
    }
    let mut k = a.matmul(&a.transpose())?;
    k.mirror_upper();
    KernelMatrix::from_gram(k)
}

fn two_point_kernel() -> Result<KernelMatrix> {
    KernelMatrix::from_gram(Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])?)
}

fn gradients() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("gradients");
    let mut rng = Rng::new(11);
    let cases = [
        ("siren", MlpArch::siren(2, 1, 32, 4)),
        ("siren_multi_out", MlpArch::siren(3, 2, 16, 3)),
        ("ffn", MlpArch::ffn(2, 1, 32, 4, 16, 2.0)),
    ];
    for (name, arch) in cases {
        let mlp = Mlp::init(arch, 3)?;
        let x = Matrix::from_fn(16, arch.in_dim, |_, _| rng.uniform(-1.0, 1.0));
        let y = Matrix::from_fn(16, arch.out_dim, |_, _| rng.normal());
        let g = check_gradients(&mlp, &x, &y, 20, GRADCHECK_STEP, &mut rng)?;
        rec.check(
            name,
            g.max_rel_error <= 1e-6,
            format!("{} params, max rel err {:.2e}", g.checked, g.max_rel_error),
        );
    }
    Ok(rec.checks)
}

fn ode_closed_form() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("ode_closed_form");
    let mut rng = Rng::new(12);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 2 + trial % 9;
        let k = random_psd(n, &mut rng)?;
        let r0: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let want = closed_form_residual(&k, &r0, 1.0, 1.0)?;
        let h = 1e-4;
        let mut r = r0.clone();
        for _ in 0..10_000 {
            let d = k.kbar.matvec(&r)?;
            for (ri, di) in r.iter_mut().zip(&d) {
                *ri -= h * di;
            }
        }
        let err: Vec<f64> = r.iter().zip(&want).map(|(a, b)| a - b).collect();
        worst = worst.max(norm2(&err) / norm2(&want).max(1e-300));
    }
    rec.check(
        "euler_agreement",
        worst <= 1e-4,
        format!("20 kernels, max rel err {worst:.2e}"),
    );

    let k = random_psd(6, &mut rng)?;
    let r0: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let norms: Vec<f64> = (0..20)
        .map(|t| closed_form_residual(&k, &r0, 0.5, t as f64 * 0.25).map(|r| norm2(&r)))
        .collect::<Result<_>>()?;
    rec.check(
        "norm_non_increasing",
        norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
        "t = 0..5".into(),
    );
    Ok(rec.checks)
}

fn spectral() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("spectral");
    let k = two_point_kernel()?;
    let l = &k.eig.eigenvalues;
    rec.check(
        "eigenvalues",
        (l[0] - 0.75).abs() < 1e-12 && (l[1] - 0.25).abs() < 1e-12,
        format!("{:.15}, {:.15}", l[0], l[1]),
    );
    let v = &k.eig.eigenvectors;
    let h = SQRT_2 / 2.0;
    let vec_ok = (v.get(0, 0).abs() - h).abs() < 1e-12
        && (v.get(1, 0).abs() - h).abs() < 1e-12
        && (v.get(0, 1).abs() - h).abs() < 1e-12
        && (v.get(1, 1) - h).abs() < 1e-12;
    rec.check("eigenvectors", vec_ok, "columns (±√2/2, √2/2)".into());
    let p = k.eig.project(&[1.0, 0.5])?;
    rec.check(
        "projections",
        (p[0] - 3.0 * SQRT_2 / 4.0).abs() < 1e-12 && (p[1] + SQRT_2 / 4.0).abs() < 1e-12,
        format!("({:.15}, {:.15})", p[0], p[1]),
    );

    let lr = 0.3;
    let hist: Vec<(f64, Vec<f64>)> = (0..40)
        .map(|s| closed_form_residual(&k, &[1.0, 0.5], lr, s as f64).map(|r| (s as f64, r)))
        .collect::<Result<_>>()?;
    let tr = spectral_track(&k, &hist)?;
    let rate_err = tr
        .decay_rates
        .iter()
        .zip(l)
        .map(|(r, lam)| r.map_or(f64::INFINITY, |r| (r - lr * lam).abs() / (lr * lam)))
        .fold(0.0, f64::max);
    rec.check(
        "decay_rates",
        rate_err <= 0.02,
        format!("max rel err {rate_err:.2e}"),
    );

    let x = Matrix::from_fn(50, 1, |i, _| -1.0 + 2.0 * i as f64 / 49.0);
    let km = gram(&CanonicalKernel::Rbf { bandwidth: 0.3 }, &x)?;
    // a generic target excites every eigen-direction
    let mut rng = Rng::new(14);
    let y: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
    let f0 = DensityFunction::new(x, vec![0.0; 50])?;
    let lr = 0.05 / km.eig.eigenvalues[0];
    let steps = 400;
    let hist = fgd_residual_history(&f0, &y, &km, lr, steps)?;
    let timed: Vec<(f64, Vec<f64>)> = hist.into_iter().enumerate().map(|(t, r)| (t as f64, r)).collect();
    let tr = spectral_track(&km, &timed)?;
    let l1 = km.eig.eigenvalues[0];
    let mut worst: f64 = 0.0;
    for (rate, lam) in tr.decay_rates.iter().zip(&km.eig.eigenvalues) {
        if *lam >= 1e-3 * l1 {
            // discrete steps decay by (1 - lr lam) per step
            let want = -(1.0 - lr * lam).ln();
            worst = worst.max(rate.map_or(f64::INFINITY, |r| (r - want).abs() / want));
        }
    }
    rec.check(
        "fgd_rbf_rates",
        worst <= 0.05,
        format!("max rel err {worst:.2e}"),
    );
    Ok(rec.checks)
}

fn ntk_drift_suite() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("ntk_drift");
    let (x, y) = sine_samples(40, -PI, PI)?;
    let steps = 400;
    let mut cfg = PgdFgdConfig::new(steps, 0.01);
    cfg.log_every = steps;
    cfg.snapshot_steps = vec![0, steps / 10, steps - steps / 10, steps];
    let rep = pgd_fgd_compare(MlpArch::ffn(1, 1, 64, 3, 32, 1.0), &x, &y, &cfg)?;
    let s = &rep.snapshots;
    let early = ntk_drift(&s[0].1, &s[1].1, &x)?;
    let late = ntk_drift(&s[2].1, &s[3].1, &x)?;
    rec.check(
        "drift_decreases",
        late < early,
        format!("first 10% {early:.3e}, last 10% {late:.3e}"),
    );
    rec.check(
        "self_drift_zero",
        ntk_drift(&s[0].1, &s[0].1, &x)? == 0.0,
        "identical checkpoints".into(),
    );
    Ok(rec.checks)
}

fn pgd_fgd() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("pgd_fgd");
    let (x, y) = sine_samples(100, -PI, PI)?;
    let mut cfg = PgdFgdConfig::new(5000, 0.01);
    cfg.log_every = 10;
    let rep = pgd_fgd_compare(MlpArch::ffn(1, 1, 256, 4, 128, 2.0), &x, &y, &cfg)?;
    rec.check("gap_zero_at_start", rep.gap[0] == 0.0, format!("{:e}", rep.gap[0]));
    let pm = *rep.pgd_mse.last().unwrap_or(&f64::NAN);
    let fm = *rep.fgd_mse.last().unwrap_or(&f64::NAN);
    rec.check(
        "both_converge",
        pm <= 1e-3 && fm <= 1e-3,
        format!("PGD MSE {pm:.2e}, FGD MSE {fm:.2e}"),
    );
    let gap = rep.matched_gap_at_loss(1e-3).map(|g| g.1).unwrap_or(f64::INFINITY);
    rec.check("matched_gap", gap <= 0.05, format!("{gap:.3e} at MSE 1e-3"));
    Ok(rec.checks)
}

fn loss_bound() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("loss_bound");
    let k = two_point_kernel()?;
    let f0 = DensityFunction::new(Matrix::from_rows(&[vec![0.0], vec![1.0]])?, vec![1.0, 0.5])?;
    let zeta = k.bound();
    for (name, lr) in [("lr_0.01", 0.01), ("lr_quarter_zeta", 1.0 / (4.0 * zeta))] {
        let hist = fgd_residual_history(&f0, &[0.0, 0.0], &k, lr, 200)?;
        let r = loss_reduction_monitor(LossKind::Square, &hist, lr, zeta, 1e-9)?;
        rec.check(name, r.holds(), format!("{} violations in 200 steps", r.violations()));
    }
    let hist = fgd_residual_history(&f0, &[0.0, 0.0], &k, 1.0, 3)?;
    let r = loss_reduction_monitor(LossKind::Square, &hist, 1.0, zeta, 1e-9)?;
    rec.check(
        "precondition_gating",
        r.precondition_violated,
        "lr above 1/(2 zeta) is flagged".into(),
    );
    let one = fgd_step(&f0, &[0.0, 0.0], &k, 0.01)?;
    rec.check(
        "single_step_decreases",
        norm2(&one.values) < norm2(&f0.values),
        "residual norm".into(),
    );
    Ok(rec.checks)
}

fn topk_oracle() -> Result<Vec<Check>> {
    let mut rec = Recorder::new("topk_oracle");
    let mut rng = Rng::new(13);
    let mut mismatches = 0;
    let mut cases = 0;
    for _ in 0..100 {
        let n = 1 + rng.below(12);
        let r: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
        for k in 1..=n {
            cases += 1;
            let got = select_topk_of(&r, k)?;
            let got_norm: f64 = got.iter().map(|&i| r[i] * r[i]).sum();
            let best = (0u32..1 << n)
                .filter(|m| m.count_ones() as usize == k)
                .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| r[i] * r[i]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            if (got_norm - best).abs() > 1e-12 {
                mismatches += 1;
            }
        }
    }
    rec.check(
        "exhaustive_agreement",
        mismatches == 0,
        format!("{cases} cases, {mismatches} mismatches"),
    );
    Ok(rec.checks)
}

/// Runs a suite (or all of them) and returns one check per property.
pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Gradients => gradients()?,
        Suite::OdeClosedForm => ode_closed_form()?,
        Suite::Spectral => spectral()?,
        Suite::NtkDrift => ntk_drift_suite()?,
        Suite::PgdFgd => pgd_fgd()?,
        Suite::LossBound => loss_bound()?,
        Suite::TopkOracle => topk_oracle()?,
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Gradients,
                Suite::OdeClosedForm,
                Suite::Spectral,
                Suite::NtkDrift,
                Suite::PgdFgd,
                Suite::LossBound,
                Suite::TopkOracle,
            ] {
                all.extend(run_suite(s)?);
            }
            all
        }
    })
}
