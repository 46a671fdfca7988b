//! Signals as coordinate/value tables: loaders, writers and synthetic
//! generators.
//!
//! Grid coordinates use pixel centers: sample `j` of an axis of length `L`
//! sits at `-1 + (2j + 1) / L`.

mod image;
mod volume;
mod wav;

pub use image::{load_image, parse_pnm, save_image, write_pnm};
pub use volume::{
    load_occupancy, sample_surface_points, save_occupancy, synth_volume, synth_volume_sphere,
    Shape, SurfaceNoise, VolumeField,
};
pub use wav::{load_audio_wav, parse_wav, save_audio_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio1D,
    Image2D,
    Volume3D,
    Synthetic1D,
}

/// `value = raw * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueScale {
    pub scale: f64,
    pub offset: f64,
}

impl ValueScale {
    pub const IDENTITY: ValueScale = ValueScale {
        scale: 1.0,
        offset: 0.0,
    };
    /// 8-bit levels `[0, 255]` onto `[-1, 1]`.
    pub const BYTE: ValueScale = ValueScale {
        scale: 2.0 / 255.0,
        offset: -1.0,
    };
    /// 16-bit PCM onto `[-1, 1)`.
    pub const PCM16: ValueScale = ValueScale {
        scale: 1.0 / 32768.0,
        offset: 0.0,
    };

    pub fn to_value(&self, raw: f64) -> f64 {
        raw * self.scale + self.offset
    }

    pub fn to_raw(&self, value: f64) -> f64 {
        (value - self.offset) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub modality: Modality,
    /// `N x d`, in `[-1, 1]^d`.
    pub coords: Matrix,
    /// `N x C`.
    pub values: Matrix,
    /// Grid dimensions, slowest axis first; `[N]` for scattered points.
    pub shape: Vec<usize>,
    pub value_scale: ValueScale,
    pub sample_rate: Option<u32>,
}

impl Signal {
    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    pub fn in_dim(&self) -> usize {
        self.coords.cols()
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    /// Same grid and metadata with new values (e.g. a reconstruction).
    pub fn with_values(&self, values: Matrix) -> Result<Signal> {
        if values.rows() != self.values.rows() || values.cols() != self.values.cols() {
            return Err(Error::invalid(format!(
                "values are {}x{}, signal is {}x{}",
                values.rows(),
                values.cols(),
                self.values.rows(),
                self.values.cols()
            )));
        }
        Ok(Signal {
            values,
            ..self.clone()
        })
    }
}

/// Pixel-center coordinate of sample `j` on an axis of length `len`.
pub fn grid_coord(j: usize, len: usize) -> f64 {
    -1.0 + (2 * j + 1) as f64 / len as f64
}

/// Row-major grid over `dims` (slowest axis first). Each row of the result
/// lists coordinates fastest axis first, so an image row is `(x, y)`.
pub fn grid_coords(dims: &[usize]) -> Matrix {
    let n: usize = dims.iter().product();
    let d = dims.len();
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        let mut rem = i;
        let row = m.row_mut(i);
        for (axis, &len) in dims.iter().enumerate().rev() {
            let j = rem % len;
            rem /= len;
            row[d - 1 - axis] = grid_coord(j, len);
        }
    }
    m
}

/// `sin(x)` on `n` evenly spaced points spanning `[lo, hi]` inclusive, with
/// coordinates mapped affinely onto `[-1, 1]`. [`sine_abscissae`] gives the
/// unmapped `x`.
pub fn synth_sine(n: usize, lo: f64, hi: f64) -> Result<Signal> {
    if n < 2 {
        return Err(Error::invalid("synth_sine needs at least 2 points"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let xs = sine_abscissae(n, lo, hi);
    let coords = Matrix::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
    let values = Matrix::from_fn(n, 1, |i, _| xs[i].sin());
    Ok(Signal {
        modality: Modality::Synthetic1D,
        coords,
        values,
        shape: vec![n],
        value_scale: ValueScale::IDENTITY,
        sample_rate: None,
    })
}

/// Unmapped inputs `x` (as an `n x 1` matrix) and targets `sin(x)` on the
/// [`synth_sine`] grid, for feeding a network the original abscissae.
pub fn sine_samples(n: usize, lo: f64, hi: f64) -> Result<(Matrix, Vec<f64>)> {
    let s = synth_sine(n, lo, hi)?;
    let x = Matrix::column(&sine_abscissae(n, lo, hi))?;
    Ok((x, s.values.col(0)))
}

/// Original-domain abscissae of a [`synth_sine`] signal.
pub fn sine_abscissae(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 / (n - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_grid() {
        let s = synth_sine(101, -PI, PI).unwrap();
        assert_eq!(s.coords.get(50, 0), 0.0);
        assert_eq!(s.values.get(50, 0), 0.0);
        assert!(s.values.get(0, 0).abs() < 1e-12 && s.values.get(100, 0).abs() < 1e-12);
        assert_eq!(s.coords.get(0, 0), -1.0);
        assert_eq!(s.coords.get(100, 0), 1.0);
        let (x, y) = sine_samples(101, -PI, PI).unwrap();
        assert_eq!(x.get(0, 0), -PI);
        assert_eq!(x.get(100, 0), PI);
        assert_eq!(y[50], 0.0);
        assert!(synth_sine(1, 0.0, 1.0).is_err());
        assert!(synth_sine(5, 1.0, 1.0).is_err());
    }

    #[test]
    fn pixel_centers() {
        assert_eq!(grid_coord(0, 1), 0.0);
        assert_eq!(grid_coord(0, 2), -0.5);
        assert_eq!(grid_coord(1, 2), 0.5);
        let g = grid_coords(&[2, 3]);
        // row 0 = (x0, y0), row 1 = (x1, y0)
        let close = |a: &[f64], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-15 && a[1] == b[1];
        assert!(close(g.row(0), [-2.0 / 3.0, -0.5]));
        assert!(close(g.row(1), [0.0, -0.5]));
        assert!(close(g.row(3), [-2.0 / 3.0, 0.5]));
    }

    #[test]
    fn value_scale_inverts() {
        for raw in 0..=255 {
            let v = ValueScale::BYTE.to_value(raw as f64);
            assert_eq!(ValueScale::BYTE.to_raw(v).round_ties_even(), raw as f64);
        }
    }
}
