//! PSNR and SSIM, computed in double precision.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            expected: a.shape(),
            got: b.shape(),
        });
    }
    Ok(())
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape("mse", a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(peak² / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Valid-mode separable filtering of an `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all window positions fully inside the image, with an
/// 11×11 Gaussian window (σ = 1.5), `k1 = 0.01`, `k2 = 0.03`. Channels are
/// scored separately and averaged.
pub fn ssim(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    same_shape("ssim", a, b)?;
    let s = a.shape();
    let (h, w) = (s.h(), s.w());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidShape {
            op: "ssim",
            reason: format!("image {h}×{w} is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} window"),
        });
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for n in 0..s.n() {
        for c in 0..s.c() {
            let x: Vec<f64> = a.plane(n, c).iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = b.plane(n, c).iter().map(|&v| v as f64).collect();
            let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
            let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, h, w, &taps));
            for k in 0..mx.len() {
                let (ux, uy) = (mx[k], my[k]);
                let vx = sxx[k] - ux * ux;
                let vy = syy[k] - uy * uy;
                let cov = sxy[k] - ux * uy;
                total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn measure(sr: &Tensor, gt: &Tensor) -> Result<Self> {
        Ok(QualityReport {
            psnr: psnr(sr, gt, 1.0)?,
            ssim: ssim(sr, gt, 1.0)?,
        })
    }

    /// Arithmetic mean of each field; `None` for an empty slice.
    pub fn mean(reports: &[QualityReport]) -> Option<QualityReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        Some(QualityReport {
            psnr: reports.iter().map(|r| r.psnr).sum::<f64>() / n,
            ssim: reports.iter().map(|r| r.ssim).sum::<f64>() / n,
        })
    }
}

/// PSNR text form: `inf` for identical images.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn img(h: usize, w: usize, f: impl Fn(usize, usize) -> f32) -> Tensor {
        Tensor::from_fn(Shape::new(1, 1, h, w), |[_, _, y, x]| f(y, x))
    }

    #[test]
    fn identical_images_are_infinite() {
        let a = img(4, 4, |y, x| (y + x) as f32 / 8.0);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(format_db(f64::INFINITY), "inf");
    }

    #[test]
    fn inverse_checkerboard_is_zero_db() {
        let a = img(6, 6, |y, x| ((y + x) % 2) as f32);
        let b = a.map(|v| 1.0 - v);
        assert!(psnr(&a, &b, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mismatched_shapes_error() {
        let a = Tensor::zeros(Shape::new(1, 1, 11, 11));
        let b = Tensor::zeros(Shape::new(1, 1, 11, 12));
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(ssim(&a, &b, 1.0).is_err());
    }

    #[test]
    fn small_images_are_rejected_by_ssim() {
        let a = Tensor::zeros(Shape::new(1, 1, 10, 20));
        assert!(matches!(ssim(&a, &a, 1.0), Err(Error::InvalidShape { .. })));
    }

    #[test]
    fn taps_are_normalized_and_symmetric() {
        let t = gaussian_taps(11, 1.5);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..11 {
            assert_eq!(t[i], t[10 - i]);
        }
    }

    #[test]
    fn ssim_of_self_is_one() {
        let a = img(16, 20, |y, x| ((y * 20 + x) as f32 * 0.37).sin() * 0.5 + 0.5);
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = img(14, 14, |y, x| ((y * 3 + x) as f32 * 0.2).cos() * 0.5 + 0.5);
        let b = img(14, 14, |y, x| ((y + 2 * x) as f32 * 0.3).sin() * 0.5 + 0.5);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        assert!((ssim(&a, &b, 1.0).unwrap() - ssim(&b, &a, 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn report_mean() {
        let r = QualityReport::mean(&[
            QualityReport { psnr: 20.0, ssim: 0.5 },
            QualityReport { psnr: 30.0, ssim: 0.7 },
        ])
        .unwrap();
        assert_eq!(r.psnr, 25.0);
        assert!((r.ssim - 0.6).abs() < 1e-12);
        assert!(QualityReport::mean(&[]).is_none());
    }
}
