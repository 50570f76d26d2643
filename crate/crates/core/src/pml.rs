//! Finite-difference Helmholtz solver on `[-L, 1 + L]^2` with a perfectly
//! matched layer of width `L` around the unit square.
//!
//! The discrete operator is the cell-centred flux form of
//! `d/dx (e_y/e_x du/dx) + d/dy (e_x/e_y du/dy) + e_x e_y k^2 (1 + q) u`,
//! scaled so that rows away from the outer boundary read
//! `(u_E + u_W + u_N + u_S - 4 u_C)/h^2 + k^2 u_C` wherever `e = 1`.
//! Layer nodes continue the interior spacing `h`; the last cell before the
//! outer boundary is shortened so that the boundary sits exactly at
//! `-L` and `1 + L`. Outer boundary rows are identity rows and their
//! couplings are dropped, which keeps the matrix complex symmetric.
//!
//! The stretching `e(t) = 1 + i k (d/L)^2` at depth `d` into the layer damps
//! outgoing waves `e^{ikr}`, the same radiation condition as the `H0^(1)`
//! kernel of [`crate::lippmann`].

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{node_offset, ComplexField, Grid, RealField};
use crate::sparse::{CsrMatrix, GridLdlt};

pub const DEFAULT_L_PML: f64 = 0.05;

/// Complex stretching factor `e(t)` of one coordinate.
pub fn stretch_coeff(t: f64, k: f64, l_pml: f64) -> Result<Complex64> {
    let slack = 1e-12 * (1.0 + l_pml);
    if !t.is_finite() || t < -l_pml - slack || t > 1.0 + l_pml + slack {
        return Err(Error::Domain { function: "stretch_coeff", value: t });
    }
    let depth = if t <= 0.0 {
        t / l_pml
    } else if t > 1.0 {
        (t - 1.0) / l_pml
    } else {
        return Ok(Complex64::new(1.0, 0.0));
    };
    Ok(Complex64::new(1.0, k * depth * depth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlConfig {
    pub k: f64,
    /// Grid points per side of the unit square.
    pub n: usize,
    pub l_pml: f64,
}

impl PmlConfig {
    pub fn new(k: f64, n: usize, l_pml: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("wavenumber must be positive, got {k}")));
        }
        if !(l_pml.is_finite() && l_pml > 0.0) {
            return Err(Error::Config(format!("layer width must be positive, got {l_pml}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points per side, got {n}")));
        }
        Ok(Self { k, n, l_pml })
    }

    pub fn with_default_layer(k: f64, n: usize) -> Result<Self> {
        Self::new(k, n, DEFAULT_L_PML)
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn interior_grid(&self) -> Grid {
        Grid::unit(self.n).expect("validated in PmlConfig::new")
    }

    /// Layer nodes strictly between the unit square and the outer boundary,
    /// per side.
    pub fn layer_nodes(&self) -> usize {
        let ratio = self.l_pml / self.h();
        let nodes = ratio.ceil() as usize;
        // Avoid a sliver cell when `L/h` is an integer up to rounding.
        if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize - 1
        } else {
            nodes - 1
        }
    }

    /// Nodes per side of the computational grid, boundary included.
    pub fn side(&self) -> usize {
        self.n + 2 * self.layer_nodes() + 2
    }

    pub fn unknowns(&self) -> usize {
        self.side() * self.side()
    }

    /// Node coordinates along either axis of the computational grid.
    pub fn axis(&self) -> Vec<f64> {
        let (h, p) = (self.h(), self.layer_nodes());
        let mut t = Vec::with_capacity(self.side());
        t.push(-self.l_pml);
        t.extend((0..p).rev().map(|m| -((m + 1) as f64) * h));
        t.extend((0..self.n).map(|i| i as f64 * h));
        t.extend((0..p).map(|m| 1.0 + (m + 1) as f64 * h));
        t.push(1.0 + self.l_pml);
        t[p + 1 + self.n - 1] = 1.0;
        t
    }

    /// Offset of the unit square's first node along each computational axis.
    pub fn interior_offset(&self) -> usize {
        self.layer_nodes() + 1
    }

    /// Spreads a field on the unit square into a computational-grid vector.
    pub fn embed(&self, f: &ComplexField) -> Result<Vec<Complex64>> {
        f.ensure_grid(&self.interior_grid())?;
        let (s, o, n) = (self.side(), self.interior_offset(), self.n);
        let mut out = vec![Complex64::default(); s * s];
        for j in 0..n {
            out[(j + o) * s + o..(j + o) * s + o + n].copy_from_slice(&f.values()[j * n..(j + 1) * n]);
        }
        Ok(out)
    }

    /// Restricts a computational-grid vector to the unit square.
    pub fn restrict(&self, u: &[Complex64]) -> ComplexField {
        let (s, o, n) = (self.side(), self.interior_offset(), self.n);
        assert_eq!(u.len(), s * s, "vector does not live on the computational grid");
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            values.extend_from_slice(&u[(j + o) * s + o..(j + o) * s + o + n]);
        }
        ComplexField::new(self.interior_grid(), values).expect("finite solver output")
    }
}

/// Assembled but not yet factored system for one contrast `q`.
#[derive(Debug, Clone)]
pub struct HelmholtzSystem {
    config: PmlConfig,
    q: RealField,
    matrix: CsrMatrix,
}

/// Builds `A(q)`. `q` may be given on the unit square or on any larger aligned
/// grid with the same spacing, in which case it must vanish outside `[0,1]^2`.
pub fn assemble(q: &RealField, config: PmlConfig) -> Result<HelmholtzSystem> {
    let q = restrict_contrast(q, &config)?;
    let axis = config.axis();
    let s = axis.len();
    let (k, l) = (config.k, config.l_pml);
    let h2 = config.h() * config.h();
    let o = config.interior_offset();
    let n = config.n;

    let node_e = axis.iter().map(|&t| stretch_coeff(t, k, l)).collect::<Result<Vec<_>>>()?;
    let mid_e = axis
        .windows(2)
        .map(|w| stretch_coeff(0.5 * (w[0] + w[1]), k, l))
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = axis.windows(2).map(|w| w[1] - w[0]).collect();
    let mut widths = vec![0.0; s];
    for m in 1..s - 1 {
        widths[m] = 0.5 * (gaps[m - 1] + gaps[m]);
    }
    let one = Complex64::new(1.0, 0.0);

    let mut rows = Vec::with_capacity(s * s);
    for j in 0..s {
        for i in 0..s {
            let c = j * s + i;
            if i == 0 || j == 0 || i == s - 1 || j == s - 1 {
                rows.push(vec![(c, one)]);
                continue;
            }
            let mut row = Vec::with_capacity(5);
            let mut diag = Complex64::default();
            // x-direction edges: coefficient w_y e_y(y_j) / (e_x(mid) d)
            for (edge, nb) in [(i - 1, c - 1), (i, c + 1)] {
                let w = widths[j] * node_e[j] / (mid_e[edge] * gaps[edge] * h2);
                diag -= w;
                if nb % s != 0 && nb % s != s - 1 {
                    row.push((nb, w));
                }
            }
            for (edge, nb) in [(j - 1, c - s), (j, c + s)] {
                let w = widths[i] * node_e[i] / (mid_e[edge] * gaps[edge] * h2);
                diag -= w;
                if nb / s != 0 && nb / s != s - 1 {
                    row.push((nb, w));
                }
            }
            let inside = (o..o + n).contains(&i) && (o..o + n).contains(&j);
            let contrast = if inside { q.at(i - o, j - o) } else { 0.0 };
            diag += widths[i] * widths[j] / h2 * node_e[i] * node_e[j] * k * k * (1.0 + contrast);
            row.push((c, diag));
            rows.push(row);
        }
    }
    Ok(HelmholtzSystem { config, q, matrix: CsrMatrix::from_rows(rows) })
}

fn restrict_contrast(q: &RealField, config: &PmlConfig) -> Result<RealField> {
    let interior = config.interior_grid();
    if q.grid().same_as(&interior) {
        return Ok(q.clone());
    }
    let (i0, j0) = node_offset(&interior, q.grid())?;
    let outer = q.grid().n();
    for j in 0..outer {
        for i in 0..outer {
            let inside = (i0..i0 + config.n).contains(&i) && (j0..j0 + config.n).contains(&j);
            if !inside && q.at(i, j) != 0.0 {
                return Err(Error::SupportViolation { i, j });
            }
        }
    }
    crate::grid::extract(q, &interior)
}

impl HelmholtzSystem {
    pub fn config(&self) -> &PmlConfig {
        &self.config
    }

    /// Contrast on the unit square.
    pub fn q(&self) -> &RealField {
        &self.q
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn factorize(self) -> Result<FactoredSystem> {
        let side = self.config.side();
        let ldlt = GridLdlt::factor(&self.matrix, side, side)?;
        Ok(FactoredSystem { system: self, ldlt, solves: AtomicUsize::new(0) })
    }
}

/// `A(q)` together with its factorization; solves may run concurrently.
#[derive(Debug)]
pub struct FactoredSystem {
    system: HelmholtzSystem,
    ldlt: GridLdlt,
    solves: AtomicUsize,
}

impl FactoredSystem {
    pub fn new(q: &RealField, config: PmlConfig) -> Result<Self> {
        assemble(q, config)?.factorize()
    }

    pub fn system(&self) -> &HelmholtzSystem {
        &self.system
    }

    pub fn config(&self) -> &PmlConfig {
        &self.system.config
    }

    /// `min|D| / max|D|` of the factorization.
    pub fn pivot_ratio(&self) -> f64 {
        self.ldlt.pivot_ratio()
    }

    /// Triangular solves performed so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Solves `A x = b` on the computational grid.
    pub fn solve_vector(&self, b: &[Complex64]) -> Vec<Complex64> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.ldlt.solve(b)
    }

    /// Right-hand side `-k^2 f` for a source on the unit square.
    pub fn source_rhs(&self, f: &ComplexField) -> Result<Vec<Complex64>> {
        let k2 = self.config().k * self.config().k;
        let mut b = self.config().embed(f)?;
        b.iter_mut().for_each(|v| *v *= -k2);
        Ok(b)
    }

    /// Solution of `Δu + k^2 (1 + q) u = -k^2 f` on the whole computational grid.
    pub fn solve_source_full(&self, f: &ComplexField) -> Result<Vec<Complex64>> {
        let b = self.source_rhs(f)?;
        let u = self.solve_vector(&b);
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SolverFailure {
                message: "non-finite solution".into(),
                pivot_ratio: self.pivot_ratio(),
            });
        }
        Ok(u)
    }

    /// `S(q) f` restricted to the unit square.
    pub fn solve_source(&self, f: &ComplexField) -> Result<ComplexField> {
        Ok(self.config().restrict(&self.solve_source_full(f)?))
    }

    /// Scattered fields `S(q)(q u_inc)` for every incident field, in order.
    pub fn forward_scatter(&self, incident: &[ComplexField]) -> Result<Vec<ComplexField>> {
        let q = &self.system.q;
        incident
            .par_iter()
            .map(|u_inc| {
                let f = u_inc.zip_with(q, |u, qv| u * qv)?;
                self.solve_source(&f)
            })
            .collect()
    }
}

/// One-shot `S(q) f`.
pub fn solve_source(q: &RealField, f: &ComplexField, config: PmlConfig) -> Result<ComplexField> {
    FactoredSystem::new(q, config)?.solve_source(f)
}

/// Scattered fields for all incident fields with a single factorization.
pub fn forward_scatter(
    q: &RealField,
    incident: &[ComplexField],
    config: PmlConfig,
) -> Result<Vec<ComplexField>> {
    FactoredSystem::new(q, config)?.forward_scatter(incident)
}
