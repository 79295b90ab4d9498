//! Image-quality metrics between predicted and reference rasters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PSNR reported when the mean squared error vanishes.
pub const PSNR_CAP_DB: f64 = 99.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub nmse: f64,
    pub mae: f64,
    pub psnr: f64,
    pub ssim: f64,
}

fn check(pred: &[f64], gt: &[f64], width: usize, height: usize) -> Result<()> {
    if pred.len() != width * height || gt.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            got: (pred.len(), gt.len()),
        });
    }
    if pred.iter().chain(gt).any(|v| !v.is_finite()) {
        return Err(Error::Undefined("metrics require finite pixels".into()));
    }
    Ok(())
}

/// NMSE, MAE, PSNR and SSIM of `pred` against `gt` (row-major).
pub fn image_metrics(pred: &[f64], gt: &[f64], width: usize, height: usize, data_range: f64) -> Result<ImageMetrics> {
    check(pred, gt, width, height)?;
    if !(data_range > 0.0) {
        return Err(Error::Config(format!("data range must be > 0, got {data_range}")));
    }
    let n = pred.len() as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut energy = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        se += (p - g).powi(2);
        ae += (p - g).abs();
        energy += g * g;
    }
    if energy == 0.0 {
        return Err(Error::Undefined("NMSE with an all-zero reference".into()));
    }
    let mse = se / n;
    let psnr = if mse < 1e-12 {
        PSNR_CAP_DB
    } else {
        20.0 * data_range.log10() - 10.0 * mse.log10()
    };
    Ok(ImageMetrics {
        nmse: se / energy,
        mae: ae / n,
        psnr,
        ssim: ssim(pred, gt, width, height, data_range)?,
    })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable Gaussian filter, valid region only.
fn filter(x: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * height];
    for v in 0..height {
        for u in 0..ow {
            rows[v * ow + u] = (0..SSIM_WINDOW).map(|k| w[k] * x[v * width + u + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for v in 0..oh {
        for u in 0..ow {
            out[v * ow + u] = (0..SSIM_WINDOW).map(|k| w[k] * rows[(v + k) * ow + u]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(x: &[f64], y: &[f64], width: usize, height: usize, data_range: f64) -> Result<f64> {
    check(x, y, width, height)?;
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::Undefined(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")));
    }
    let w = gaussian_window();
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = y.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter(x, width, height, &w);
    let my = filter(y, width, height, &w);
    let sxx = filter(&xx, width, height, &w);
    let syy = filter(&yy, width, height, &w);
    let sxy = filter(&xy, width, height, &w);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (a, b) = (mx[i], my[i]);
        let vx = sxx[i] - a * a;
        let vy = syy[i] - b * b;
        let cov = sxy[i] - a * b;
        total += ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}
