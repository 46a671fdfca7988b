use super::Matrix;
use crate::error::{Error, Result};

/// Default off-diagonal tolerance for [`sym_eig`].
pub const DEFAULT_EIG_TOL: f64 = 1e-12;
/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Eigendecomposition `A = V diag(λ) V^T` of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; column `i` of `eigenvectors`
/// belongs to `eigenvalues[i]`. Each eigenvector is oriented so that its last
/// nonzero component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V^T x`: coordinates of `x` in the eigenbasis.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eigenvectors.t_matvec(x)
    }

    /// `V c`: maps eigenbasis coordinates back.
    pub fn unproject(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.eigenvectors.matvec(c)
    }

    /// `V diag(f(λ)) V^T`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for (k, &w) in fl.iter().enumerate() {
                    s += v.get(i, k) * w * v.get(j, k);
                }
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }

    /// `V diag(exp(scale λ)) V^T x` without forming the exponential.
    pub fn expm_apply(&self, scale: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut c = self.project(x)?;
        for (ci, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= (scale * l).exp();
        }
        self.unproject(&c)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map_spectrum(|l| l)
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Sweeps over all `(p, q)` pairs until the largest off-diagonal magnitude is
/// at most `tol * max(1, max|a|)`.
pub fn sym_eig(a: &Matrix, tol: f64) -> Result<SymEig> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "sym_eig needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.all_finite() {
        return Err(Error::invalid("sym_eig: non-finite entry"));
    }
    if !a.is_symmetric(1e-12) {
        return Err(Error::invalid("sym_eig: matrix is not symmetric"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("sym_eig: tolerance must be positive"));
    }

    let n = a.rows();
    let mut w = a.clone();
    w.mirror_upper();
    let mut v = Matrix::identity(n);
    let threshold = tol * a.max_abs().max(1.0);

    let mut converged = n <= 1;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if max_off_diagonal(&w) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut w, &mut v, p, q);
            }
        }
    }
    if !converged && max_off_diagonal(&w) > threshold {
        return Err(Error::invalid(format!(
            "sym_eig: no convergence after {MAX_JACOBI_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w.get(j, j).total_cmp(&w.get(i, i)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| w.get(i, i)).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.col(src);
        orient(&mut col);
        for (i, x) in col.into_iter().enumerate() {
            eigenvectors.set(i, dst, x);
        }
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Matrix exponential `exp(scale * A)` of a symmetric matrix.
pub fn sym_expm(a: &Matrix, scale: f64) -> Result<Matrix> {
    let eig = sym_eig(a, DEFAULT_EIG_TOL)?;
    Ok(eig.map_spectrum(|l| (scale * l).exp()))
}

fn max_off_diagonal(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max(a.get(i, j).abs());
        }
    }
    m
}

/// One Jacobi rotation zeroing `a[p][q]`; accumulates the rotation into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

fn orient(col: &mut [f64]) {
    if let Some(&last) = col.iter().rev().find(|x| x.abs() > 1e-12) {
        if last < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use std::f64::consts::SQRT_2;

    fn random_symmetric(n: usize, rng: &mut Rng) -> Matrix {
        let mut a = Matrix::from_fn(n, n, |_, _| rng.uniform(-1.0, 1.0));
        a.mirror_upper();
        a
    }

    fn orthonormality_error(v: &Matrix) -> f64 {
        let vtv = v.transpose().matmul(v).unwrap();
        vtv.sub(&Matrix::identity(v.rows())).unwrap().max_abs()
    }

    #[test]
    fn two_by_two_worked_example() {
        let a = Matrix::from_rows(&[vec![0.5, 0.25], vec![0.25, 0.5]]).unwrap();
        let e = sym_eig(&a, DEFAULT_EIG_TOL).unwrap();
        assert!((e.eigenvalues[0] - 0.75).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 0.25).abs() < 1e-15);
        let h = SQRT_2 / 2.0;
        assert!((e.eigenvectors.get(0, 0) - h).abs() < 1e-15);
        assert!((e.eigenvectors.get(1, 0) - h).abs() < 1e-15);
        assert!((e.eigenvectors.get(0, 1) + h).abs() < 1e-15);
        assert!((e.eigenvectors.get(1, 1) - h).abs() < 1e-15);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eig(&Matrix::identity(3), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert!(orthonormality_error(&e.eigenvectors) < 1e-15);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = Rng::new(8);
        let a = random_symmetric(8, &mut rng);
        let e = sym_eig(&a, DEFAULT_EIG_TOL).unwrap();
        assert!(orthonormality_error(&e.eigenvectors) <= 1e-10);
        assert!(e.reconstruct().sub(&a).unwrap().max_abs() <= 1e-8 * a.max_abs().max(1.0));
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sym_eig(&Matrix::zeros(2, 3), DEFAULT_EIG_TOL).is_err());
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            sym_eig(&a, DEFAULT_EIG_TOL),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn expm_of_zero_and_diagonal() {
        let z = sym_expm(&Matrix::zeros(3, 3), 2.5).unwrap();
        assert!(z.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
        let d = sym_expm(&Matrix::from_diag(&[2.0, 3.0]), 1.0).unwrap();
        assert!((d.get(0, 0) - 2f64.exp()).abs() < 1e-12);
        assert!((d.get(1, 1) - 3f64.exp()).abs() < 1e-12);
        assert!(d.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn expm_matches_taylor_series() {
        // oracle: sum_{i<=30} (sA)^i / i!
        let a = Matrix::from_rows(&[vec![0.5, 0.25], vec![0.25, 0.5]]).unwrap();
        let s = -1.0;
        let sa = a.scale(s);
        let mut term = Matrix::identity(2);
        let mut sum = Matrix::identity(2);
        for i in 1..=30 {
            term = term.matmul(&sa).unwrap().scale(1.0 / i as f64);
            sum = sum.add(&term).unwrap();
        }
        let e = sym_expm(&a, s).unwrap();
        assert!(e.sub(&sum).unwrap().max_abs() < 1e-9);
    }
}
