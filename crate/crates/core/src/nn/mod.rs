//! Coordinate MLPs (SIREN and Fourier-feature networks) with hand-written
//! forward and backward passes.
//!
//! Parameters live in one flat vector: every layer's weight matrix in layer
//! order (each row-major, `out x in`), followed by every layer's bias. The
//! optimizers and the tangent-kernel code only ever see that flat vector.

pub mod fastmath;
mod gemm;
mod gradcheck;
mod io;
mod pass;

pub use gradcheck::{check_gradients, GradCheck, GRADCHECK_FLOOR, GRADCHECK_STEP};
pub use io::{load_weights, read_weights, save_weights, write_weights, WeightsHeader};
pub use pass::{LayerTangent, Workspace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Default SIREN frequency.
pub const DEFAULT_OMEGA0: f64 = 30.0;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `sin(omega0 * z)`
    Sine { omega0: f64 },
    Relu,
    /// No nonlinearity; makes the network a (deep) linear map.
    Identity,
}

/// Input encoding applied before the first linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    None,
    /// `x -> (cos(2 pi B x), sin(2 pi B x))` with `B` drawn `N(0, sigma^2)`.
    FourierFeatures { num_features: usize, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpArch {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_width: usize,
    /// Number of linear layers, including the output layer.
    pub depth: usize,
    pub activation: Activation,
    pub encoding: Encoding,
}

impl MlpArch {
    pub fn siren(in_dim: usize, out_dim: usize, hidden_width: usize, depth: usize) -> Self {
        MlpArch {
            in_dim,
            out_dim,
            hidden_width,
            depth,
            activation: Activation::Sine {
                omega0: DEFAULT_OMEGA0,
            },
            encoding: Encoding::None,
        }
    }

    /// ReLU network behind random Fourier features.
    pub fn ffn(
        in_dim: usize,
        out_dim: usize,
        hidden_width: usize,
        depth: usize,
        num_features: usize,
        sigma: f64,
    ) -> Self {
        MlpArch {
            in_dim,
            out_dim,
            hidden_width,
            depth,
            activation: Activation::Relu,
            encoding: Encoding::FourierFeatures {
                num_features,
                sigma,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::invalid("in_dim and out_dim must be positive"));
        }
        if self.depth < 2 {
            return Err(Error::invalid(format!("depth must be >= 2, got {}", self.depth)));
        }
        if self.hidden_width == 0 {
            return Err(Error::invalid("hidden_width must be >= 1"));
        }
        if let Activation::Sine { omega0 } = self.activation {
            if !(omega0 > 0.0 && omega0.is_finite()) {
                return Err(Error::invalid(format!("omega0 must be > 0, got {omega0}")));
            }
        }
        if let Encoding::FourierFeatures {
            num_features,
            sigma,
        } = self.encoding
        {
            if num_features == 0 {
                return Err(Error::invalid("num_features must be >= 1"));
            }
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Width of the vector entering the first linear layer.
    pub fn encoded_dim(&self) -> usize {
        match self.encoding {
            Encoding::None => self.in_dim,
            Encoding::FourierFeatures { num_features, .. } => 2 * num_features,
        }
    }

    /// Layer widths `d_0, ..., d_depth`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.depth + 1);
        w.push(self.encoded_dim());
        w.extend(std::iter::repeat_n(self.hidden_width, self.depth - 1));
        w.push(self.out_dim);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths()
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Frozen random Fourier projection, `num_features x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasis {
    pub b_matrix: Matrix,
}

/// Offsets of one layer's weights and bias inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerView {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerView {
    pub fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }
}

/// Computes the layer views implied by an architecture.
pub fn layer_views(arch: &MlpArch) -> Vec<LayerView> {
    let widths = arch.widths();
    let weight_total: usize = widths.windows(2).map(|w| w[0] * w[1]).sum();
    let mut w_off = 0;
    let mut b_off = weight_total;
    widths
        .windows(2)
        .map(|w| {
            let v = LayerView {
                fan_in: w[0],
                fan_out: w[1],
                weight_offset: w_off,
                bias_offset: b_off,
            };
            w_off += w[0] * w[1];
            b_off += w[1];
            v
        })
        .collect()
}

/// A coordinate network `f_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    arch: MlpArch,
    theta: Vec<f64>,
    seed: u64,
    fourier: Option<FourierBasis>,
    layers: Vec<LayerView>,
}

impl Mlp {
    /// Deterministic initialization.
    ///
    /// Sine networks follow the SIREN scheme: first layer
    /// `U(-1/fan_in, 1/fan_in)`, later layers `U(-sqrt(6/fan_in)/omega0, ..)`.
    /// ReLU and identity networks use `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
    /// Biases start at zero.
    pub fn init(arch: MlpArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = Rng::new(seed);
        let fourier = fourier_basis(&arch, &mut rng);
        let layers = layer_views(&arch);
        let mut theta = vec![0.0; arch.param_count()];
        for (l, view) in layers.iter().enumerate() {
            let fan_in = view.fan_in as f64;
            let bound = match arch.activation {
                Activation::Sine { .. } if l == 0 => 1.0 / fan_in,
                Activation::Sine { omega0 } => (6.0 / fan_in).sqrt() / omega0,
                Activation::Relu | Activation::Identity => (6.0 / fan_in).sqrt(),
            };
            let w = &mut theta[view.weight_offset..view.weight_offset + view.weight_len()];
            for x in w.iter_mut() {
                *x = rng.uniform(-bound, bound);
            }
        }
        Ok(Mlp {
            arch,
            theta,
            seed,
            fourier,
            layers,
        })
    }

    /// Builds a network from explicit parameters. The Fourier basis (if any)
    /// is regenerated from `seed`.
    pub fn from_parts(arch: MlpArch, seed: u64, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        let mut rng = Rng::new(seed);
        let fourier = fourier_basis(&arch, &mut rng);
        Ok(Mlp {
            layers: layer_views(&arch),
            arch,
            theta,
            seed,
            fourier,
        })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    /// Mutable access for optimizers.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn layers(&self) -> &[LayerView] {
        &self.layers
    }

    pub fn fourier(&self) -> Option<&FourierBasis> {
        self.fourier.as_ref()
    }

    pub(crate) fn weight(&self, l: usize) -> &[f64] {
        let v = &self.layers[l];
        &self.theta[v.weight_offset..v.weight_offset + v.weight_len()]
    }

    pub(crate) fn bias(&self, l: usize) -> &[f64] {
        let v = &self.layers[l];
        &self.theta[v.bias_offset..v.bias_offset + v.fan_out]
    }
}

fn fourier_basis(arch: &MlpArch, rng: &mut Rng) -> Option<FourierBasis> {
    match arch.encoding {
        Encoding::None => None,
        Encoding::FourierFeatures {
            num_features,
            sigma,
        } => Some(FourierBasis {
            b_matrix: Matrix::from_fn(num_features, arch.in_dim, |_, _| sigma * rng.normal()),
        }),
    }
}

/// A differentiable model whose parameter gradients define a tangent kernel.
pub trait TangentModel {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn param_count(&self) -> usize;

    /// `d f_c(x) / d theta` for every output channel `c`.
    fn per_example_jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>>;

    /// Gram matrix of tangent vectors `<J(x_i), J(x_j)>` for a scalar-output
    /// model. Built from the upper triangle and mirrored, so exactly
    /// symmetric.
    fn tangent_gram(&self, coords: &Matrix) -> Result<Matrix> {
        if self.out_dim() != 1 {
            return Err(Error::Unsupported(
                "tangent kernel is defined for scalar-output models".into(),
            ));
        }
        let jac: Vec<Vec<f64>> = (0..coords.rows())
            .map(|i| self.per_example_jacobian(coords.row(i)).map(|mut j| j.remove(0)))
            .collect::<Result<_>>()?;
        let n = jac.len();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                k.set(i, j, crate::linalg::dot_unchecked(&jac[i], &jac[j]));
            }
        }
        k.mirror_upper();
        Ok(k)
    }
}

/// `f(x) = theta . x`: the parametric special case whose tangent kernel is
/// the linear kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub theta: Vec<f64>,
}

impl LinearModel {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        crate::linalg::dot(&self.theta, x)
    }
}

impl TangentModel for LinearModel {
    fn in_dim(&self) -> usize {
        self.theta.len()
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn param_count(&self) -> usize {
        self.theta.len()
    }
    fn per_example_jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.theta.len() {
            return Err(Error::invalid("coordinate dimension mismatch"));
        }
        Ok(vec![x.to_vec()])
    }
}
