//! Reconstruction quality: relative L2 error and SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Norm, RealField};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// `||rec - truth||_L2 / ||truth||_L2`
pub fn relative_error(rec: &RealField, truth: &RealField) -> Result<f64> {
    rec.ensure_grid(truth.grid())?;
    let denom = truth.norm(Norm::L2);
    if denom == 0.0 {
        return Err(Error::Degenerate("relative error against a zero field".into()));
    }
    Ok(rec.zip_with(truth, |a, b| a - b)?.norm(Norm::L2) / denom)
}

/// Mean SSIM with the dynamic range taken from `truth`.
pub fn ssim(rec: &RealField, truth: &RealField) -> Result<f64> {
    ssim_with_range(rec, truth, dynamic_range(truth)?)
}

pub fn dynamic_range(truth: &RealField) -> Result<f64> {
    let (lo, hi) = truth
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let d = hi - lo;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::Degenerate("SSIM needs a non-constant reference".into()))
    }
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian filtering over all fully contained windows.
fn filter_valid(img: &[f64], n: usize, w: &[f64]) -> Vec<f64> {
    let m = n + 1 - w.len();
    let mut rows = vec![0.0; n * m];
    for j in 0..n {
        for i in 0..m {
            rows[j * m + i] = w.iter().enumerate().map(|(t, wt)| wt * img[j * n + i + t]).sum();
        }
    }
    let mut out = vec![0.0; m * m];
    for j in 0..m {
        for i in 0..m {
            out[j * m + i] = w.iter().enumerate().map(|(t, wt)| wt * rows[(j + t) * m + i]).sum();
        }
    }
    out
}

pub fn ssim_with_range(a: &RealField, b: &RealField, range: f64) -> Result<f64> {
    a.ensure_grid(b.grid())?;
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::Degenerate(format!("invalid SSIM dynamic range {range}")));
    }
    let n = a.grid().n();
    if n < SSIM_WINDOW {
        return Err(Error::InvalidGrid(format!("SSIM needs at least {SSIM_WINDOW} points per side")));
    }
    let w = gaussian_window();
    let (x, y) = (a.values(), b.values());
    let prod = |f: &dyn Fn(usize) -> f64| (0..x.len()).map(f).collect::<Vec<_>>();
    let mx = filter_valid(x, n, &w);
    let my = filter_valid(y, n, &w);
    let mxx = filter_valid(&prod(&|i| x[i] * x[i]), n, &w);
    let myy = filter_valid(&prod(&|i| y[i] * y[i]), n, &w);
    let mxy = filter_valid(&prod(&|i| x[i] * y[i]), n, &w);
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let total: f64 = (0..mx.len())
        .map(|p| {
            let (ux, uy) = (mx[p], my[p]);
            let vx = mxx[p] - ux * ux;
            let vy = myy[p] - uy * uy;
            let cxy = mxy[p] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rel_err: f64,
    pub ssim: f64,
    /// Final objective value when known.
    pub data_misfit: Option<f64>,
    pub dynamic_range: f64,
}

impl MetricReport {
    pub fn compute(rec: &RealField, truth: &RealField, data_misfit: Option<f64>) -> Result<Self> {
        let dynamic_range = dynamic_range(truth)?;
        Ok(Self {
            rel_err: relative_error(rec, truth)?,
            ssim: ssim_with_range(rec, truth, dynamic_range)?,
            data_misfit,
            dynamic_range,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_normalized_and_symmetric() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(w[i], w[SSIM_WINDOW - 1 - i]);
        }
    }
}
