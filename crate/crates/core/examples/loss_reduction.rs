//! Checks the per-step loss decrease of functional gradient descent against
//! the bound set by the largest kernel entry, for a step inside and a step
//! outside the admissible range.

use inr_teach::dynamics::{fgd_residual_history, loss_reduction_monitor, DensityFunction, LossKind};
use inr_teach::kernels::{gram, CanonicalKernel};
use inr_teach::signals::synth_sine;

fn main() -> inr_teach::Result<()> {
    let sine = synth_sine(64, -std::f64::consts::PI, std::f64::consts::PI)?;
    let targets = sine.values.as_slice().to_vec();
    let kernel = gram(&CanonicalKernel::Rbf { bandwidth: 0.3 }, &sine.coords)?;
    let zeta = kernel.bound();
    let f0 = DensityFunction::new(sine.coords.clone(), vec![0.0; targets.len()])?;

    for lr in [1.0 / (4.0 * zeta), 4.0 / zeta] {
        let history = fgd_residual_history(&f0, &targets, &kernel, lr, 200)?;
        let report = loss_reduction_monitor(LossKind::Square, &history, lr, zeta, 1e-12)?;
        println!(
            "lr {lr:.3}: precondition {}, {} of {} steps violate the bound",
            if report.precondition_violated { "violated" } else { "met" },
            report.violations(),
            report.per_step.len()
        );
    }
    Ok(())
}
