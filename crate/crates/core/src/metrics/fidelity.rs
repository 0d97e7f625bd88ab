//! PSNR and SSIM for images with values in `[0, 1]`.

use crate::error::Result;
use crate::geometry::FeatureImage;
use crate::scalar::Real;

pub const PSNR_CAP_DB: f64 = 100.0;
const PSNR_MSE_FLOOR: f64 = 1e-10;

pub fn psnr<T: Real>(a: &FeatureImage<T>, b: &FeatureImage<T>) -> Result<T> {
    let mse = a.mean_squared_error(b)?;
    if mse < T::lit(PSNR_MSE_FLOOR) {
        return Ok(T::lit(PSNR_CAP_DB));
    }
    Ok(T::lit(10.0) * (T::one() / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over every fully-contained 11x11 Gaussian window (sigma 1.5),
/// averaged over channels. Smaller images use the largest odd window that fits.
pub fn ssim<T: Real>(a: &FeatureImage<T>, b: &FeatureImage<T>) -> Result<T> {
    a.ensure_shape(b)?;
    let (h, w, c) = a.shape();
    let mut size = SSIM_WINDOW.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let g = gaussian_window(size, SSIM_SIGMA);
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        for y0 in 0..=h - size {
            for x0 in 0..=w - size {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (dy, gy) in g.iter().enumerate() {
                    for (dx, gx) in g.iter().enumerate() {
                        let wgt = gy * gx;
                        let va = a.get(y0 + dy, x0 + dx, ch).to_f64_lossy();
                        let vb = b.get(y0 + dy, x0 + dx, ch).to_f64_lossy();
                        mx += wgt * va;
                        my += wgt * vb;
                        sxx += wgt * va * va;
                        syy += wgt * vb * vb;
                        sxy += wgt * va * vb;
                    }
                }
                let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                total += ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                    / ((mx * mx + my * my + C1) * (vx + vy + C2));
                count += 1;
            }
        }
    }
    Ok(T::lit(total / count as f64))
}
