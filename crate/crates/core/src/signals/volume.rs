//! Analytic 3D shapes on voxel grids, surface-point sampling, and raw
//! occupancy grids with a JSON sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{grid_coords, Modality, Signal, ValueScale};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    /// Ring in the xy-plane.
    Torus { major: f64, minor: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius } => radius > 0.0 && radius < 1.0,
            Shape::Torus { major, minor } => minor > 0.0 && major > minor && major + minor < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("shape {self:?} does not fit inside [-1, 1]^3")))
        }
    }

    pub fn sdf(&self, p: &[f64]) -> f64 {
        match *self {
            Shape::Sphere { radius } => (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - radius,
            Shape::Torus { major, minor } => {
                let q = (p[0] * p[0] + p[1] * p[1]).sqrt() - major;
                (q * q + p[2] * p[2]).sqrt() - minor
            }
        }
    }

    fn surface_point(&self, rng: &mut Rng) -> [f64; 3] {
        match *self {
            Shape::Sphere { radius } => loop {
                let v = [rng.normal(), rng.normal(), rng.normal()];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-12 {
                    break [radius * v[0] / n, radius * v[1] / n, radius * v[2] / n];
                }
            },
            Shape::Torus { major, minor } => {
                let u = rng.uniform(0.0, std::f64::consts::TAU);
                let v = rng.uniform(0.0, std::f64::consts::TAU);
                let ring = major + minor * v.cos();
                [ring * u.cos(), ring * u.sin(), minor * v.sin()]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeField {
    /// 1 inside or on the surface, 0 outside.
    Occupancy,
    /// Signed distance, negative inside.
    Sdf,
}

/// `shape` sampled at the voxel centers of a `grid_dim^3` grid.
pub fn synth_volume(shape: Shape, grid_dim: usize, field: VolumeField) -> Result<Signal> {
    if grid_dim < 2 {
        return Err(Error::invalid("grid_dim must be at least 2"));
    }
    shape.validate()?;
    let dims = vec![grid_dim; 3];
    let coords = grid_coords(&dims);
    let values: Vec<f64> = (0..coords.rows())
        .map(|i| {
            let d = shape.sdf(coords.row(i));
            match field {
                VolumeField::Sdf => d,
                VolumeField::Occupancy => (d <= 0.0) as u8 as f64,
            }
        })
        .collect();
    Ok(Signal {
        modality: Modality::Volume3D,
        values: Matrix::from_vec(coords.rows(), 1, values)?,
        coords,
        shape: dims,
        value_scale: ValueScale::IDENTITY,
        sample_rate: None,
    })
}

pub fn synth_volume_sphere(grid_dim: usize, radius: f64, field: VolumeField) -> Result<Signal> {
    synth_volume(Shape::Sphere { radius }, grid_dim, field)
}

/// Variances of the two Laplace perturbation levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceNoise {
    pub coarse_variance: f64,
    pub fine_variance: f64,
}

impl Default for SurfaceNoise {
    fn default() -> Self {
        SurfaceNoise {
            coarse_variance: 1e-1,
            fine_variance: 1e-3,
        }
    }
}

/// Surface points of `shape` perturbed by Laplace noise, `n_coarse` at the
/// coarse variance followed by `n_fine` at the fine one. Targets are the
/// exact signed distance at the perturbed points, which are clamped to the
/// unit cube.
pub fn sample_surface_points(
    shape: Shape,
    n_coarse: usize,
    n_fine: usize,
    noise: SurfaceNoise,
    rng: &mut Rng,
) -> Result<Signal> {
    shape.validate()?;
    if !(noise.coarse_variance >= 0.0 && noise.fine_variance >= 0.0) {
        return Err(Error::invalid("noise variances must be non-negative"));
    }
    let n = n_coarse + n_fine;
    let mut coords = Matrix::zeros(n, 3);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let var = if i < n_coarse {
            noise.coarse_variance
        } else {
            noise.fine_variance
        };
        // Laplace(b) has variance 2 b^2
        let b = (var / 2.0).sqrt();
        let p = shape.surface_point(rng);
        let row = coords.row_mut(i);
        for (r, c) in row.iter_mut().zip(p) {
            let jitter = if b > 0.0 { rng.laplace(b) } else { 0.0 };
            *r = (c + jitter).clamp(-1.0, 1.0);
        }
        values.push(shape.sdf(coords.row(i)));
    }
    Ok(Signal {
        modality: Modality::Volume3D,
        coords,
        values: Matrix::from_vec(n, 1, values)?,
        shape: vec![n],
        value_scale: ValueScale::IDENTITY,
        sample_rate: None,
    })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dims: Vec<usize>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes one byte per voxel and `<path>.json` with `{"dims": [...]}`.
pub fn save_occupancy(dims: &[usize], occupancy: &[u8], path: &Path) -> Result<()> {
    if dims.iter().product::<usize>() != occupancy.len() {
        return Err(Error::invalid("occupancy length does not match dims"));
    }
    std::fs::write(path, occupancy).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_vec(&Sidecar {
        dims: dims.to_vec(),
    })?;
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn load_occupancy(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let side = sidecar_path(path);
    let text = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_slice(&text)
        .map_err(|e| Error::parse(0, format!("bad occupancy sidecar: {e}")))?;
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let want = meta
        .dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::parse(0, "sidecar dims overflow"))?;
    if data.len() != want {
        return Err(Error::parse(
            data.len().min(want),
            format!("occupancy has {} bytes, dims need {want}", data.len()),
        ));
    }
    if let Some(at) = data.iter().position(|&b| b > 1) {
        return Err(Error::parse(at, "occupancy bytes must be 0 or 1"));
    }
    Ok((meta.dims, data))
}
