//! Canonical RKHS kernels and the empirical neural tangent kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, sym_eig, Matrix, SymEig, DEFAULT_EIG_TOL};
use crate::nn::{Mlp, TangentModel};

/// Tolerance for the PSD check on `K/N`.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CanonicalKernel {
    /// `exp(-|x - x'|^2 / (2 h^2))`
    Rbf { bandwidth: f64 },
    /// `<x, x'>`
    Linear,
}

impl CanonicalKernel {
    /// RBF with the median-heuristic bandwidth: the median pairwise distance
    /// of `coords`. Falls back to 1 when all points coincide.
    pub fn rbf_median(coords: &Matrix) -> Self {
        let mut d = Vec::new();
        for i in 0..coords.rows() {
            for j in (i + 1)..coords.rows() {
                d.push(squared_distance(coords.row(i), coords.row(j)).sqrt());
            }
        }
        d.sort_by(f64::total_cmp);
        let median = if d.is_empty() {
            0.0
        } else if d.len() % 2 == 1 {
            d[d.len() / 2]
        } else {
            0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
        };
        CanonicalKernel::Rbf {
            bandwidth: if median > 0.0 { median } else { 1.0 },
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            CanonicalKernel::Rbf { bandwidth } => {
                (-squared_distance(x, y) / (2.0 * bandwidth * bandwidth)).exp()
            }
            CanonicalKernel::Linear => dot_unchecked(x, y),
        }
    }
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// A Gram matrix `K`, its normalization `K/N`, and the eigendecomposition
/// of `K/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub k: Matrix,
    pub kbar: Matrix,
    pub eig: SymEig,
}

impl KernelMatrix {
    /// Validates symmetry and positive semidefiniteness, then decomposes.
    pub fn from_gram(k: Matrix) -> Result<Self> {
        if !k.is_square() || k.rows() == 0 {
            return Err(Error::invalid("kernel matrix must be square and non-empty"));
        }
        if !k.is_symmetric(1e-12) {
            return Err(Error::invalid("kernel matrix is not symmetric"));
        }
        let n = k.rows();
        let kbar = k.scale(1.0 / n as f64);
        let eig = sym_eig(&kbar, DEFAULT_EIG_TOL)?;
        let floor = -PSD_TOL * eig.eigenvalues[0].abs().max(1.0);
        if let Some(&min) = eig.eigenvalues.last() {
            if min < floor {
                return Err(Error::invalid(format!(
                    "kernel matrix is not positive semidefinite (min eigenvalue {min:e})"
                )));
            }
        }
        Ok(KernelMatrix { k, kbar, eig })
    }

    pub fn n(&self) -> usize {
        self.k.rows()
    }

    /// Largest entry magnitude; for a PSD matrix this equals `max_i K_ii`.
    pub fn bound(&self) -> f64 {
        self.k.max_abs()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        self.k.write_csv(w)
    }
}

/// `K_ij = k(x_i, x_j)` over the rows of `coords`.
pub fn gram(kernel: &CanonicalKernel, coords: &Matrix) -> Result<KernelMatrix> {
    if coords.rows() == 0 {
        return Err(Error::invalid("gram needs at least one point"));
    }
    if !coords.all_finite() {
        return Err(Error::invalid("non-finite coordinate"));
    }
    if let CanonicalKernel::Rbf { bandwidth } = kernel {
        if !(*bandwidth > 0.0) {
            return Err(Error::invalid("RBF bandwidth must be positive"));
        }
    }
    let n = coords.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            k.set(i, j, kernel.eval(coords.row(i), coords.row(j)));
        }
    }
    k.mirror_upper();
    KernelMatrix::from_gram(k)
}

/// Empirical NTK `K_ij = <df(x_i)/dtheta, df(x_j)/dtheta>` of a scalar-output
/// model at its current parameters.
pub fn empirical_ntk<M: TangentModel>(model: &M, coords: &Matrix) -> Result<KernelMatrix> {
    if model.out_dim() != 1 {
        return Err(Error::Unsupported(format!(
            "empirical NTK needs a scalar-output model, got out_dim {}",
            model.out_dim()
        )));
    }
    KernelMatrix::from_gram(model.tangent_gram(coords)?)
}

/// Relative Frobenius change `|K1 - K0|_F / |K0|_F` of the NTK between two
/// checkpoints of the same architecture.
///
/// Not symmetric under swapping the checkpoints: the denominator is always
/// the first argument's kernel.
pub fn ntk_drift(mlp_t0: &Mlp, mlp_t1: &Mlp, coords: &Matrix) -> Result<f64> {
    if mlp_t0.arch() != mlp_t1.arch() || mlp_t0.fourier() != mlp_t1.fourier() {
        return Err(Error::invalid("checkpoints have different architectures"));
    }
    let k0 = mlp_t0.tangent_gram(coords)?;
    let k1 = mlp_t1.tangent_gram(coords)?;
    let denom = k0.frobenius();
    if denom == 0.0 {
        return Err(Error::invalid("reference NTK is identically zero"));
    }
    Ok(k1.sub(&k0)?.frobenius() / denom)
}
