//! Branch-free `sin`/`cos` over slices.
//!
//! Sine layers evaluate millions of `sin`/`cos` pairs per training step, and
//! the libm call dominates a step otherwise. This is the fdlibm kernel pair on
//! `[-pi/4, pi/4]` behind a three-part Cody–Waite reduction, written so the
//! compiler vectorizes the loop. Accurate to a few ulp for `|x| < 2^20`, which
//! covers every pre-activation a trained network produces.
//!
//! The AVX paths are the same arithmetic (no FMA contraction), so results are
//! bit-identical whichever path runs.

#![allow(clippy::excessive_precision, clippy::approx_constant)]

const FRAC_2_PI: f64 = 6.36619772367581382433e-01;
const PIO2_1: f64 = 1.57079632673412561417e+00;
const PIO2_2: f64 = 6.07710050630396597660e-11;
const PIO2_3: f64 = 2.02226624879595063154e-21;
// 1.5 * 2^52: adding and subtracting rounds to nearest integer, and the low
// mantissa bits of the sum hold that integer.
const ROUND_MAGIC: f64 = 6755399441055744.0;

const S1: f64 = -1.66666666666666324348e-01;
const S2: f64 = 8.33333333332248946124e-03;
const S3: f64 = -1.98412698298579493134e-04;
const S4: f64 = 2.75573137070700676789e-06;
const S5: f64 = -2.50507602534068634195e-08;
const S6: f64 = 1.58969099521155010221e-10;

const C1: f64 = 4.16666666666666019037e-02;
const C2: f64 = -1.38888888888741095749e-03;
const C3: f64 = 2.48015872894767294178e-05;
const C4: f64 = -2.75573143513906633035e-07;
const C5: f64 = 2.08757232129817482790e-09;
const C6: f64 = -1.13596475577881948265e-11;

#[inline(always)]
fn sin_cos_one(x: f64) -> (f64, f64) {
    let shifted = x * FRAC_2_PI + ROUND_MAGIC;
    let q = shifted.to_bits() & 3;
    let n = shifted - ROUND_MAGIC;
    let r = ((x - n * PIO2_1) - n * PIO2_2) - n * PIO2_3;

    let z = r * r;
    let ps = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    let s = r + r * z * (S1 + z * ps);
    let pc = C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6))));
    let c = 1.0 - 0.5 * z + z * z * pc;

    // odd quadrants swap sin and cos
    let swap = (q & 1).wrapping_neg();
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let sv = (sb & !swap) | (cb & swap);
    let cv = (cb & !swap) | (sb & swap);
    let sin_sign = (q & 2) << 62;
    let cos_sign = ((q + 1) & 2) << 62;
    (f64::from_bits(sv ^ sin_sign), f64::from_bits(cv ^ cos_sign))
}

#[inline(always)]
fn sin_cos_scaled_generic(scale: f64, x: &[f64], sin_out: &mut [f64], cos_out: &mut [f64]) {
    for ((&xi, s), c) in x.iter().zip(sin_out.iter_mut()).zip(cos_out.iter_mut()) {
        let (sv, cv) = sin_cos_one(scale * xi);
        *s = sv;
        *c = cv;
    }
}

/// Sine layer activation over a `rows x bias.len()` block of pre-activations
/// `z`: `act = sin(w (z + b))`, `deriv = w cos(w (z + b))`.
#[inline(always)]
fn sine_layer_generic(omega: f64, z: &[f64], bias: &[f64], act: &mut [f64], deriv: &mut [f64]) {
    let width = bias.len();
    for ((zr, ar), dr) in z
        .chunks_exact(width)
        .zip(act.chunks_exact_mut(width))
        .zip(deriv.chunks_exact_mut(width))
    {
        for (((&zi, &bi), a), d) in zr.iter().zip(bias).zip(ar.iter_mut()).zip(dr.iter_mut()) {
            let (sv, cv) = sin_cos_one(omega * (zi + bi));
            *a = sv;
            *d = omega * cv;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn sine_layer_avx512(omega: f64, z: &[f64], bias: &[f64], act: &mut [f64], deriv: &mut [f64]) {
    sine_layer_generic(omega, z, bias, act, deriv)
}

pub(crate) fn sine_layer(omega: f64, z: &[f64], bias: &[f64], act: &mut [f64], deriv: &mut [f64]) {
    assert!(z.len() == act.len() && z.len() == deriv.len() && z.len().is_multiple_of(bias.len().max(1)));
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            unsafe { sine_layer_avx512(omega, z, bias, act, deriv) };
            return;
        }
    }
    sine_layer_generic(omega, z, bias, act, deriv)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn sin_cos_scaled_avx512(scale: f64, x: &[f64], sin_out: &mut [f64], cos_out: &mut [f64]) {
    sin_cos_scaled_generic(scale, x, sin_out, cos_out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn sin_cos_scaled_avx2(scale: f64, x: &[f64], sin_out: &mut [f64], cos_out: &mut [f64]) {
    sin_cos_scaled_generic(scale, x, sin_out, cos_out)
}

/// `sin_out[i] = sin(scale * x[i])`, `cos_out[i] = cos(scale * x[i])`.
pub fn sin_cos_scaled(scale: f64, x: &[f64], sin_out: &mut [f64], cos_out: &mut [f64]) {
    assert!(x.len() == sin_out.len() && x.len() == cos_out.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            unsafe { sin_cos_scaled_avx512(scale, x, sin_out, cos_out) };
            return;
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            unsafe { sin_cos_scaled_avx2(scale, x, sin_out, cos_out) };
            return;
        }
    }
    sin_cos_scaled_generic(scale, x, sin_out, cos_out)
}

#[inline]
pub fn sin_cos(x: f64) -> (f64, f64) {
    sin_cos_one(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    #[test]
    fn matches_libm() {
        let mut rng = Rng::new(1);
        let mut worst: f64 = 0.0;
        for i in 0..200_000 {
            let mag = [1.0, 10.0, 100.0, 3000.0][i % 4];
            let x = rng.uniform(-mag, mag);
            let (s, c) = sin_cos(x);
            worst = worst.max((s - x.sin()).abs()).max((c - x.cos()).abs());
        }
        assert!(worst < 4e-16, "worst abs error {worst}");
    }

    #[test]
    fn exact_at_special_points() {
        assert_eq!(sin_cos(0.0), (0.0, 1.0));
        let (s, c) = sin_cos(std::f64::consts::FRAC_PI_2);
        assert!((s - 1.0).abs() < 1e-16 && c.abs() < 1e-16);
        let (s, c) = sin_cos(-std::f64::consts::PI);
        assert!(s.abs() < 1e-15 && (c + 1.0).abs() < 1e-16);
    }

    #[test]
    fn slice_version_agrees_with_scalar() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 - 500.0) * 0.037).collect();
        let mut s = vec![0.0; xs.len()];
        let mut c = vec![0.0; xs.len()];
        sin_cos_scaled(30.0, &xs, &mut s, &mut c);
        for (i, &x) in xs.iter().enumerate() {
            let (es, ec) = sin_cos(30.0 * x);
            assert_eq!(s[i].to_bits(), es.to_bits());
            assert_eq!(c[i].to_bits(), ec.to_bits());
        }
    }
}
