//! Constant-coefficient scattering operator and the truncated Neumann series.
//!
//! `apply_s_hat` discretizes `u(x) = -k^2 \int_Omega G(x, y) f(y) dy` with
//! `G(x, y) = -(i/4) H0^(1)(k |x - y|)`, i.e. the outgoing solution of
//! `Delta u + k^2 u = -k^2 f`. Off-diagonal weights use the midpoint rule
//! `h^2 G(x_i, y_j)`; the singular self cell is replaced by the disk of equal
//! area, integrated in closed form. The resulting Toeplitz-block operator is
//! applied as an aperiodic convolution through a zero-padded 2-D FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, Norm, RealField};
use crate::special::hankel1;

/// Relative size of the last Neumann term, w.r.t. the partial sum, below which
/// the series counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-2;

const POWER_ITERATION_SEED: u64 = 0x5eed_2d1a;

/// `G(r) = -(i/4) H0^(1)(k r)` for `r > 0`.
pub fn green_kernel(k: f64, r: f64) -> Result<Complex64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain { function: "green_kernel (k)", value: k });
    }
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain { function: "green_kernel (r)", value: r });
    }
    Ok(Complex64::new(0.0, -0.25) * hankel1(0, k * r)?)
}

/// `\int_0^rho H0^(1)(k r) r dr = (rho/k) H1^(1)(k rho) + 2i/(pi k^2)`.
pub fn disk_hankel_integral(k: f64, rho: f64) -> Result<Complex64> {
    Ok(rho / k * hankel1(1, k * rho)? + Complex64::new(0.0, 2.0 / (PI * k * k)))
}

/// Precomputed convolution stencil of `S_hat` on a grid.
#[derive(Clone)]
pub struct GreenKernel {
    k: f64,
    grid: Grid,
    /// `weights[|dj| * n + |di|]`, the stencil depends only on `|di|, |dj|`.
    weights: Vec<Complex64>,
    padded: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GreenKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel")
            .field("k", &self.k)
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .finish()
    }
}

impl GreenKernel {
    pub fn new(k: f64, grid: Grid) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain { function: "GreenKernel (k)", value: k });
        }
        let n = grid.n();
        let h = grid.h();
        let k2 = k * k;
        let mut weights = vec![Complex64::default(); n * n];
        for dj in 0..n {
            for di in 0..n {
                weights[dj * n + di] = if di == 0 && dj == 0 {
                    let rho = h / PI.sqrt();
                    // -k^2 * (-i/4) * 2 pi * int_0^rho H0 r dr
                    Complex64::new(0.0, 0.5 * PI * k2) * disk_hankel_integral(k, rho)?
                } else {
                    let r = h * ((di * di + dj * dj) as f64).sqrt();
                    -k2 * h * h * green_kernel(k, r)?
                };
            }
        }

        let padded = next_smooth(2 * n - 1);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let mut spectrum = vec![Complex64::default(); padded * padded];
        for dj in -(n as isize - 1)..n as isize {
            for di in -(n as isize - 1)..n as isize {
                let r = dj.rem_euclid(padded as isize) as usize;
                let c = di.rem_euclid(padded as isize) as usize;
                spectrum[r * padded + c] = weights[dj.unsigned_abs() * n + di.unsigned_abs()];
            }
        }
        let mut kernel = Self { k, grid, weights, padded, spectrum, forward, inverse };
        let mut spectrum = std::mem::take(&mut kernel.spectrum);
        kernel.fft2(&mut spectrum, false);
        let scale = 1.0 / (padded * padded) as f64;
        spectrum.iter_mut().for_each(|v| *v *= scale);
        kernel.spectrum = spectrum;
        Ok(kernel)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Stencil weight for the index offset `(di, dj)`.
    pub fn weight(&self, di: isize, dj: isize) -> Complex64 {
        let n = self.grid.n();
        self.weights[dj.unsigned_abs() * n + di.unsigned_abs()]
    }

    /// In-place unnormalized 2-D transform of a `padded x padded` row-major buffer.
    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.padded;
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process(buf);
        transpose(buf, m);
        plan.process(buf);
        transpose(buf, m);
    }

    /// Discrete `S_hat f`.
    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        f.ensure_grid(&self.grid)?;
        let n = self.grid.n();
        let m = self.padded;
        let mut buf = vec![Complex64::default(); m * m];
        for (j, row) in f.values().chunks_exact(n).enumerate() {
            buf[j * m..j * m + n].copy_from_slice(row);
        }
        self.fft2(&mut buf, false);
        buf.iter_mut().zip(&self.spectrum).for_each(|(b, s)| *b *= s);
        self.fft2(&mut buf, true);
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            out.extend_from_slice(&buf[j * m..j * m + n]);
        }
        ComplexField::new(self.grid, out)
    }
}

fn transpose(buf: &mut [Complex64], m: usize) {
    for r in 0..m {
        for c in r + 1..m {
            buf.swap(r * m + c, c * m + r);
        }
    }
}

/// Smallest `2^a 3^b 5^c >= n`.
fn next_smooth(n: usize) -> usize {
    (n..)
        .find(|&v| {
            let mut v = v;
            for p in [2, 3, 5] {
                while v % p == 0 {
                    v /= p;
                }
            }
            v == 1
        })
        .expect("smooth numbers are unbounded")
}

/// Discrete `S_hat f`; see [`GreenKernel::apply`].
pub fn apply_s_hat(f: &ComplexField, kernel: &GreenKernel) -> Result<ComplexField> {
    kernel.apply(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannDiagnostics {
    /// Number of terms summed.
    pub order: usize,
    /// `||u^(j)||_L2` for `j = 1..=order`.
    pub term_norms: Vec<f64>,
    pub converged: bool,
    /// Geometric-mean ratio of successive term norms.
    pub contraction_estimate: f64,
}

impl NeumannDiagnostics {
    fn from_norms(term_norms: Vec<f64>, sum_norm: f64, tol: f64) -> Self {
        let order = term_norms.len();
        let mut streak = 0;
        let mut diverging = false;
        for w in term_norms.windows(2) {
            if w[1] >= w[0] && w[1] > 0.0 {
                streak += 1;
                diverging |= streak >= 2;
            } else {
                streak = 0;
            }
        }
        let last = term_norms.last().copied().unwrap_or(0.0);
        let converged = !diverging && last <= tol * sum_norm;
        let first = term_norms.first().copied().unwrap_or(0.0);
        let contraction_estimate = if order < 2 || first == 0.0 {
            0.0
        } else {
            (last / first).powf(1.0 / (order - 1) as f64)
        };
        Self { order, term_norms, converged, contraction_estimate }
    }
}

/// Partial sum `U^(L) = sum_{j=1}^{L} u^(j)` of `u^(0) = u_inc`,
/// `u^(j+1) = S_hat(q u^(j))`. `order = 1` is the Born approximation.
pub fn neumann_forward(
    q: &RealField,
    u_inc: &ComplexField,
    kernel: &GreenKernel,
    order: usize,
) -> Result<(ComplexField, NeumannDiagnostics)> {
    neumann_forward_with_tol(q, u_inc, kernel, order, CONVERGENCE_TOL)
}

pub fn neumann_forward_with_tol(
    q: &RealField,
    u_inc: &ComplexField,
    kernel: &GreenKernel,
    order: usize,
    tol: f64,
) -> Result<(ComplexField, NeumannDiagnostics)> {
    if order == 0 {
        return Err(Error::Config("Neumann truncation order must be at least 1".into()));
    }
    q.ensure_grid(kernel.grid())?;
    u_inc.ensure_grid(kernel.grid())?;
    let mut term = u_inc.clone();
    let mut sum = ComplexField::zeros(*kernel.grid());
    let mut norms = Vec::with_capacity(order);
    for _ in 0..order {
        let source = term.zip_with(q, |u, qv| u * qv)?;
        term = kernel.apply(&source)?;
        norms.push(term.norm(Norm::L2));
        sum = sum.zip_with(&term, |a, b| a + b)?;
    }
    let diagnostics = NeumannDiagnostics::from_norms(norms, sum.norm(Norm::L2), tol);
    Ok((sum, diagnostics))
}

/// Power-iteration estimate of the operator norm of `f -> S_hat(q f)`, run on
/// its normal operator from a fixed pseudo-random start.
pub fn estimate_contraction(q: &RealField, kernel: &GreenKernel, iters: usize) -> Result<f64> {
    if iters < 5 {
        return Err(Error::Config(format!("need at least 5 power iterations, got {iters}")));
    }
    q.ensure_grid(kernel.grid())?;
    let grid = *kernel.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let start: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut x = ComplexField::new(grid, start)?;
    let euclid = |f: &ComplexField| f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let norm = euclid(&x);
    x = x.scale(1.0 / norm);

    let mut estimate = 0.0;
    for _ in 0..iters {
        let bx = kernel.apply(&x.zip_with(q, |u, qv| u * qv)?)?;
        estimate = euclid(&bx);
        // B^H y = q conj(S_hat(conj y)) since the stencil is symmetric.
        let back = kernel.apply(&bx.conj())?.conj().zip_with(q, |u, qv| u * qv)?;
        let norm = euclid(&back);
        if norm == 0.0 {
            return Ok(0.0);
        }
        x = back.scale(1.0 / norm);
    }
    Ok(estimate)
}
