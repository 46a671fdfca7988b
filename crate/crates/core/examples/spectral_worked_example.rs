//! The two-point kernel example: eigendecomposition, residual projections,
//! and the closed-form decay of each component under functional gradient
//! descent compared with explicit small steps.

use inr_teach::dynamics::{closed_form_residual, fgd_step, DensityFunction};
use inr_teach::kernels::KernelMatrix;
use inr_teach::linalg::Matrix;

fn main() -> inr_teach::Result<()> {
    let k = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])?;
    let kernel = KernelMatrix::from_gram(k)?;
    println!("eigenvalues of K/N: {:?}", kernel.eig.eigenvalues);

    let coords = Matrix::from_rows(&[vec![0.0], vec![1.0]])?;
    let targets = [1.0, 0.0];
    let mut f = DensityFunction::new(coords, vec![0.0, 0.0])?;
    let r0 = f.residual(&targets)?;
    println!("initial projections: {:?}", kernel.eig.project(&r0)?);

    let lr = 0.01;
    for step in 1..=500 {
        f = fgd_step(&f, &targets, &kernel, lr)?;
        if step % 100 == 0 {
            let explicit = f.residual(&targets)?;
            let closed = closed_form_residual(&kernel, &r0, lr, step as f64)?;
            println!(
                "step {step:>3}: projections {:?}  closed form {:?}",
                kernel.eig.project(&explicit)?,
                kernel.eig.project(&closed)?
            );
        }
    }
    Ok(())
}
