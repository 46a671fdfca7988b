//! Relative change of the empirical NTK between training snapshots, early
//! versus late in training.

use inr_teach::dynamics::{pgd_fgd_compare, PgdFgdConfig};
use inr_teach::kernels::ntk_drift;
use inr_teach::nn::MlpArch;
use inr_teach::signals::sine_samples;

fn main() -> inr_teach::Result<()> {
    let steps = 2000;
    let (x, y) = sine_samples(40, -std::f64::consts::PI, std::f64::consts::PI)?;
    let mut config = PgdFgdConfig::new(steps, 0.01);
    config.snapshot_steps = vec![0, steps / 10, steps * 9 / 10, steps];
    let report = pgd_fgd_compare(MlpArch::ffn(1, 1, 256, 4, 128, 2.0), &x, &y, &config)?;

    let snap = |s: usize| &report.snapshots.iter().find(|(t, _)| *t == s).expect("snapshot").1;
    let early = ntk_drift(snap(0), snap(steps / 10), &x)?;
    let late = ntk_drift(snap(steps * 9 / 10), snap(steps), &x)?;
    println!("relative NTK drift, steps 0..{}: {early:.4e}", steps / 10);
    println!("relative NTK drift, steps {}..{steps}: {late:.4e}", steps * 9 / 10);
    Ok(())
}
