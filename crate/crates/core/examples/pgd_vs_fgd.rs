//! Trains a Fourier-feature network on a sine by plain gradient descent and
//! tracks the same problem in function space under the network's NTK.
//!
//!     cargo run --release --example pgd_vs_fgd -- [steps]

use inr_teach::dynamics::{pgd_fgd_compare, PgdFgdConfig};
use inr_teach::nn::MlpArch;
use inr_teach::signals::sine_samples;

fn main() -> inr_teach::Result<()> {
    let steps = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("steps"));
    let (x, y) = sine_samples(100, -std::f64::consts::PI, std::f64::consts::PI)?;
    let arch = MlpArch::ffn(1, 1, 256, 4, 128, 2.0);
    let mut config = PgdFgdConfig::new(steps, 0.01);
    config.log_every = steps / 20;
    let report = pgd_fgd_compare(arch, &x, &y, &config)?;

    println!("{:>6} {:>12} {:>12} {:>10}", "step", "pgd mse", "fgd mse", "max gap");
    for i in 0..report.logged_steps.len() {
        println!(
            "{:>6} {:>12.3e} {:>12.3e} {:>10.4}",
            report.logged_steps[i], report.pgd_mse[i], report.fgd_mse[i], report.gap[i]
        );
    }
    if let Some((step, gap)) = report.matched_gap_at_loss(1e-3) {
        println!("at matched loss 1e-3 (PGD step {step}) the functions differ by at most {gap:.4}");
    }
    Ok(())
}
