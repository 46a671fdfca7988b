//! Reconstruction quality: MSE, PSNR, SSIM and occupancy IoU.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::signals::{Modality, Signal};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "shape mismatch: {} vs {} values",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn mse(reference: &[f64], reconstruction: &[f64]) -> Result<f64> {
    same_len(reference, reconstruction)?;
    if reference.is_empty() {
        return Err(Error::invalid("mse of empty arrays"));
    }
    let s: f64 = reference
        .iter()
        .zip(reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / reference.len() as f64)
}

/// `10 log10(peak^2 / mse)`; `+inf` for identical inputs.
pub fn psnr(reference: &[f64], reconstruction: &[f64], peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::invalid("PSNR peak must be positive"));
    }
    let m = mse(reference, reconstruction)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows of two
/// single-channel images with values in `[0, 1]`.
pub fn ssim(reference: &Matrix, reconstruction: &Matrix) -> Result<f64> {
    let (h, w) = (reference.rows(), reference.cols());
    if reconstruction.rows() != h || reconstruction.cols() != w {
        return Err(Error::invalid("images differ in size"));
    }
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let g = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (x, y) = (reference.as_slice(), reconstruction.as_slice());

    // separable filtering of x, y, x^2, y^2, xy: rows first, then columns
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![[0.0f64; 5]; h * ow];
    for i in 0..h {
        for j in 0..ow {
            let mut acc = [0.0; 5];
            for (t, &gt) in g.iter().enumerate() {
                let (a, b) = (x[i * w + j + t], y[i * w + j + t]);
                acc[0] += gt * a;
                acc[1] += gt * b;
                acc[2] += gt * a * a;
                acc[3] += gt * b * b;
                acc[4] += gt * a * b;
            }
            rows[i * ow + j] = acc;
        }
    }
    let mut total = 0.0;
    for i in 0..oh {
        for j in 0..ow {
            let mut m = [0.0; 5];
            for (t, &gt) in g.iter().enumerate() {
                let r = rows[(i + t) * ow + j];
                for k in 0..5 {
                    m[k] += gt * r[k];
                }
            }
            let (mx, my) = (m[0], m[1]);
            let vx = m[2] - mx * mx;
            let vy = m[3] - my * my;
            let cxy = m[4] - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (oh * ow) as f64)
}

/// `|A and B| / |A or B|`, 1 when both are empty.
pub fn iou(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("occupancy grids differ in size"));
    }
    if a.iter().chain(b).any(|&v| v > 1) {
        return Err(Error::invalid("occupancy values must be 0 or 1"));
    }
    let inter = a.iter().zip(b).filter(|(x, y)| **x == 1 && **y == 1).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x == 1 || **y == 1).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Occupied where the signed distance is `<= 0`.
pub fn occupancy_from_sdf(sdf: &[f64]) -> Vec<u8> {
    sdf.iter().map(|&d| (d <= 0.0) as u8).collect()
}

/// Occupied where the value is `>= 0.5`.
pub fn occupancy_from_field(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&v| (v >= 0.5) as u8).collect()
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("bad PSNR value '{t}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub psnr_db: f64,
    pub psnr_peak: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iou: Option<f64>,
}

/// Quality of `reconstruction` (`N x C`, same layout as `reference.values`).
///
/// Images are compared after mapping `[-1, 1]` to `[0, 1]` with peak 1; SSIM
/// is averaged over channels. Other signals use their native values with
/// peak 1. Volumes on a grid also report IoU, thresholding signed distances
/// at 0 and occupancies at 0.5.
pub fn evaluate(reference: &Signal, reconstruction: &Matrix) -> Result<MetricReport> {
    let a = reference.values.as_slice();
    let b = reconstruction.as_slice();
    same_len(a, b)?;
    match reference.modality {
        Modality::Image2D => {
            let unit = |v: &[f64]| v.iter().map(|x| 0.5 * (x + 1.0)).collect::<Vec<f64>>();
            let (ua, ub) = (unit(a), unit(b));
            let (h, w) = (reference.shape[0], reference.shape[1]);
            let c = reference.channels();
            let mut s = 0.0;
            for ch in 0..c {
                let plane = |u: &[f64]| Matrix::from_fn(h, w, |i, j| u[(i * w + j) * c + ch]);
                s += ssim(&plane(&ua), &plane(&ub))?;
            }
            Ok(MetricReport {
                mse: mse(&ua, &ub)?,
                psnr_db: psnr(&ua, &ub, 1.0)?,
                psnr_peak: 1.0,
                ssim: Some(s / c as f64),
                iou: None,
            })
        }
        Modality::Volume3D => {
            let is_occupancy = a.iter().all(|&v| v == 0.0 || v == 1.0);
            let (oa, ob) = if is_occupancy {
                (occupancy_from_field(a), occupancy_from_field(b))
            } else {
                (occupancy_from_sdf(a), occupancy_from_sdf(b))
            };
            Ok(MetricReport {
                mse: mse(a, b)?,
                psnr_db: psnr(a, b, 1.0)?,
                psnr_peak: 1.0,
                ssim: None,
                iou: Some(iou(&oa, &ob)?),
            })
        }
        Modality::Audio1D | Modality::Synthetic1D => Ok(MetricReport {
            mse: mse(a, b)?,
            psnr_db: psnr(a, b, 1.0)?,
            psnr_peak: 1.0,
            ssim: None,
            iou: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        Matrix::from_fn(h, w, |_, _| rng.unit())
    }

    #[test]
    fn psnr_cases() {
        assert_eq!(psnr(&[0.1, 0.2], &[0.1, 0.2], 1.0).unwrap(), f64::INFINITY);
        let v = psnr(&[0.0; 4], &[0.1; 4], 1.0).unwrap();
        assert!((v - 20.0).abs() < 1e-12);
        assert!(psnr(&[0.0; 3], &[0.0; 4], 1.0).is_err());
    }

    #[test]
    fn psnr_matches_direct_formula() {
        let mut rng = Rng::new(4);
        let a: Vec<f64> = (0..300).map(|_| rng.unit()).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.unit()).collect();
        let mut m = 0.0;
        for i in 0..300 {
            m += (a[i] - b[i]).powi(2);
        }
        m /= 300.0;
        let want = 10.0 * (255.0f64 * 255.0 / m).log10();
        assert!((psnr(&a, &b, 255.0).unwrap() - want).abs() < 1e-12);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let a = random_image(16, 20, 1);
        let b = random_image(16, 20, 2);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-15);
        assert!(ssim(&Matrix::zeros(10, 20), &Matrix::zeros(10, 20)).is_err());
    }

    #[test]
    fn ssim_of_negative_is_negative() {
        let a = Matrix::from_fn(24, 24, |i, j| if (i / 3 + j / 3) % 2 == 0 { 0.9 } else { 0.1 });
        let neg = Matrix::from_fn(24, 24, |i, j| 1.0 - a.get(i, j));
        assert!(ssim(&a, &neg).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_images_is_luminance_term() {
        let (p, q) = (0.2, 0.7);
        let c1 = SSIM_K1 * SSIM_K1;
        let want = (2.0 * p * q + c1) / (p * p + q * q + c1);
        let a = Matrix::from_fn(11, 11, |_, _| p);
        let b = Matrix::from_fn(11, 11, |_, _| q);
        assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(iou(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!((iou(&[1, 1, 0], &[0, 1, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&[0, 0], &[0, 0]).unwrap(), 1.0);
        assert!(iou(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn report_json_spells_inf() {
        let r = MetricReport {
            mse: 0.0,
            psnr_db: f64::INFINITY,
            psnr_peak: 1.0,
            ssim: Some(1.0),
            iou: None,
        };
        let j = serde_json::to_string(&r).unwrap();
        assert!(j.contains("\"psnr_db\":\"inf\""));
        assert_eq!(serde_json::from_str::<MetricReport>(&j).unwrap(), r);
    }
}
