//! Uniform square grids and the real/complex nodal fields living on them.
//!
//! Values are stored row-major with `y` as the slow index: node `(i, j)` with
//! `x = x0 + i h` and `y = y0 + j h` sits at `values[j * n + i]`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square `n x n` grid over `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Grid {
    pub fn new(n: usize, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points per side, got {n}")));
        }
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidGrid(format!("empty box [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        let (wx, wy) = (x1 - x0, y1 - y0);
        if (wx - wy).abs() > 1e-12 * wx.max(wy) {
            return Err(Error::InvalidGrid(format!("box is not square: {wx} vs {wy}")));
        }
        Ok(Self { n, x0, y0, x1, y1 })
    }

    /// Grid over the unit square `[0, 1]^2`, the interior region of every problem.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 0.0, 0.0, 1.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[x0, y0, x1, y1]`.
    pub fn bounds(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn h(&self) -> f64 {
        (self.x1 - self.x0) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            self.x1
        } else {
            self.x0 + i as f64 * self.h()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.n - 1 {
            self.y1
        } else {
            self.y0 + j as f64 * self.h()
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Bilinear stencil of `(x, y)`: the four enclosing nodes and their weights.
    /// Weights are non-negative and sum to one.
    pub fn bilinear_stencil(&self, x: f64, y: f64) -> Result<[(usize, f64); 4]> {
        if !self.contains(x, y) || !x.is_finite() || !y.is_finite() {
            return Err(Error::OutOfDomain { x, y });
        }
        let h = self.h();
        let (i, tx) = cell_coordinate((x - self.x0) / h, self.n);
        let (j, ty) = cell_coordinate((y - self.y0) / h, self.n);
        Ok([
            (self.index(i, j), (1.0 - tx) * (1.0 - ty)),
            (self.index(i + 1, j), tx * (1.0 - ty)),
            (self.index(i, j + 1), (1.0 - tx) * ty),
            (self.index(i + 1, j + 1), tx * ty),
        ])
    }

    /// True when `other` has the same node set (within round-off).
    pub fn same_as(&self, other: &Grid) -> bool {
        let scale = (self.x1 - self.x0).abs().max(1.0);
        self.n == other.n
            && self
                .bounds()
                .iter()
                .zip(other.bounds().iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12 * scale)
    }

    /// Coarse grid on the same box obtained by keeping every `stride`-th node.
    pub fn coarsen(&self, n_coarse: usize) -> Result<(Grid, usize)> {
        if n_coarse < 3 || n_coarse > self.n || !(self.n - 1).is_multiple_of(n_coarse - 1) {
            return Err(Error::IncompatibleGrid(format!(
                "cannot restrict {} points per side onto {n_coarse}",
                self.n
            )));
        }
        let stride = (self.n - 1) / (n_coarse - 1);
        Ok((Grid::new(n_coarse, self.x0, self.y0, self.x1, self.y1)?, stride))
    }
}

fn cell_coordinate(s: f64, n: usize) -> (usize, f64) {
    let last = (n - 2) as f64;
    let cell = s.floor().clamp(0.0, last);
    (cell as usize, (s - cell).clamp(0.0, 1.0))
}

/// Scalar types a field can hold.
pub trait FieldValue:
    Copy + Default + PartialEq + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn modulus(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl FieldValue for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl FieldValue for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Nodal values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    Linf,
}

impl<T: FieldValue> Field<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::InvalidGrid(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![T::default(); grid.len()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> T) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..n {
            let y = grid.y(j);
            for i in 0..n {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::default())
    }

    pub fn ensure_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrid(format!(
                "field on {:?} where {:?} was expected",
                self.grid, grid
            )))
        }
    }

    /// `L2 = h * sqrt(sum |f|^2)` with uniform cell weights; `Linf = max |f|`.
    pub fn norm(&self, kind: Norm) -> f64 {
        match kind {
            Norm::L2 => {
                let sum: f64 = self.values.iter().map(|v| v.modulus().powi(2)).sum();
                self.grid.h() * sum.sqrt()
            }
            Norm::Linf => self.values.iter().fold(0.0, |m, v| m.max(v.modulus())),
        }
    }

    pub fn zip_with<U: FieldValue, V: FieldValue>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Field<V>> {
        other.ensure_grid(&self.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Bilinear interpolation at a physical point.
    pub fn sample(&self, x: f64, y: f64) -> Result<T> {
        let stencil = self.grid.bilinear_stencil(x, y)?;
        Ok(stencil
            .iter()
            .fold(T::default(), |acc, &(idx, w)| acc + self.values[idx] * w))
    }

    /// Pointwise injection onto the coarse grid with `n_coarse` points per side.
    pub fn restrict(&self, n_coarse: usize) -> Result<Self> {
        let (coarse, stride) = self.grid.coarsen(n_coarse)?;
        let mut values = Vec::with_capacity(coarse.len());
        for j in 0..n_coarse {
            for i in 0..n_coarse {
                values.push(self.at(i * stride, j * stride));
            }
        }
        Ok(Self { grid: coarse, values })
    }

    /// Bilinear interpolation onto the refined grid with `n_fine` points per side.
    pub fn prolongate(&self, n_fine: usize) -> Result<Self> {
        let fine = Grid::new(n_fine, self.grid.x0, self.grid.y0, self.grid.x1, self.grid.y1)?;
        // Validates divisibility.
        fine.coarsen(self.grid.n())?;
        let mut out = Vec::with_capacity(fine.len());
        for j in 0..n_fine {
            for i in 0..n_fine {
                out.push(self.sample(fine.x(i), fine.y(j))?);
            }
        }
        Ok(Self { grid: fine, values: out })
    }
}

impl RealField {
    /// Complex copy with zero imaginary part.
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl ComplexField {
    pub fn real_part(&self) -> RealField {
        self.map(|v| v.re)
    }

    pub fn imag_part(&self) -> RealField {
        self.map(|v| v.im)
    }

    pub fn abs(&self) -> RealField {
        self.map(|v| v.norm())
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Plane wave `exp(i k (x cos(theta) + y sin(theta)))`.
    pub fn plane_wave(grid: Grid, k: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::from_fn(grid, |x, y| Complex64::from_polar(1.0, k * (x * c + y * s)))
    }

    /// Hermitian pairing `sum a conj(b)` over nodes (no cell weight).
    pub fn dot(&self, other: &ComplexField) -> Complex64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Embed a field given on `inner` into `outer` (zero elsewhere). Every inner node must
/// coincide with an outer node.
pub fn zero_extend<T: FieldValue>(f: &Field<T>, outer: &Grid) -> Result<Field<T>> {
    let (i0, j0) = node_offset(f.grid(), outer)?;
    let n = f.grid().n();
    let mut out = Field::zeros(*outer);
    for j in 0..n {
        let src = &f.values()[j * n..(j + 1) * n];
        let start = outer.index(i0, j0 + j);
        out.values[start..start + n].copy_from_slice(src);
    }
    Ok(out)
}

/// Extract the sub-field on `inner` from a field given on a larger aligned grid.
pub fn extract<T: FieldValue>(f: &Field<T>, inner: &Grid) -> Result<Field<T>> {
    let (i0, j0) = node_offset(inner, f.grid())?;
    let n = inner.n();
    let mut values = Vec::with_capacity(inner.len());
    for j in 0..n {
        let start = f.grid().index(i0, j0 + j);
        values.extend_from_slice(&f.values()[start..start + n]);
    }
    Ok(Field { grid: *inner, values })
}

/// Node offset `(i0, j0)` of `inner`'s first node inside `outer`, requiring equal spacing
/// and node alignment.
pub fn node_offset(inner: &Grid, outer: &Grid) -> Result<(usize, usize)> {
    let h = outer.h();
    let mismatch = || {
        Error::IncompatibleGrid(format!("{inner:?} is not an aligned subgrid of {outer:?}"))
    };
    if (inner.h() - h).abs() > 1e-9 * h {
        return Err(mismatch());
    }
    let [ix0, iy0, _, _] = inner.bounds();
    let [ox0, oy0, _, _] = outer.bounds();
    let si = (ix0 - ox0) / h;
    let sj = (iy0 - oy0) / h;
    let (ri, rj) = (si.round(), sj.round());
    if (si - ri).abs() > 1e-6 || (sj - rj).abs() > 1e-6 || ri < 0.0 || rj < 0.0 {
        return Err(mismatch());
    }
    let (i0, j0) = (ri as usize, rj as usize);
    if i0 + inner.n() > outer.n() || j0 + inner.n() > outer.n() {
        return Err(mismatch());
    }
    Ok((i0, j0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::unit(n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::unit(2).is_err());
        assert!(Grid::new(5, 0.0, 0.0, 1.0, 2.0).is_err());
        assert!(Grid::new(5, 1.0, 0.0, 0.0, 1.0).is_err());
        let g = unit(129);
        assert_eq!(g.h(), 1.0 / 128.0);
        assert_eq!(g.x(128), 1.0);
    }

    #[test]
    fn sample_reproduces_constants_and_nodes() {
        let g = unit(9);
        let c = Complex64::new(0.3, -1.2);
        let f = ComplexField::from_fn(g, |_, _| c);
        for &(x, y) in &[(0.0, 0.0), (0.37, 0.91), (1.0, 1.0), (0.5, 0.0)] {
            assert!((f.sample(x, y).unwrap() - c).norm() < 1e-15);
        }
        let f = ComplexField::from_fn(g, |x, y| Complex64::new(x * x, y.sin()));
        assert_eq!(f.sample(g.x(3), g.y(5)).unwrap(), f.at(3, 5));
        assert_eq!(f.sample(1.0, 1.0).unwrap(), f.at(8, 8));
    }

    #[test]
    fn sample_reproduces_bilinear_functions() {
        let g = unit(17);
        let f = RealField::from_fn(g, |x, y| x * y);
        let h = g.h();
        let (x, y) = (g.x(4) + 0.5 * h, g.y(11) + 0.5 * h);
        assert!((f.sample(x, y).unwrap() - x * y).abs() <= 1e-14);
        let f = RealField::from_fn(g, |x, y| 2.0 - 3.0 * x + 0.5 * y + 4.0 * x * y);
        for &(x, y) in &[(0.123, 0.877), (0.999, 0.001), (0.5, 0.25)] {
            let exact = 2.0 - 3.0 * x + 0.5 * y + 4.0 * x * y;
            assert!((f.sample(x, y).unwrap() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn sample_outside_is_an_error() {
        let f = RealField::zeros(unit(5));
        assert!(matches!(f.sample(1.01, 0.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(f.sample(0.5, -1e-9), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn restrict_by_injection() {
        let g = unit(513);
        let f = RealField::from_fn(g, |x, y| 3.0 * x - y + 0.25);
        let c = f.restrict(129).unwrap();
        assert_eq!(c.grid().n(), 129);
        assert_eq!(c.at(0, 0), f.at(0, 0));
        assert_eq!(c.at(128, 128), f.at(512, 512));
        assert_eq!(c.at(128, 0), f.at(512, 0));
        assert_eq!(c.at(7, 9), f.at(28, 36));
        let expect = RealField::from_fn(*c.grid(), |x, y| 3.0 * x - y + 0.25);
        for (a, b) in c.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(f.restrict(513).unwrap(), f);
        assert!(matches!(f.restrict(100), Err(Error::IncompatibleGrid(_))));
    }

    #[test]
    fn restrict_undoes_prolongation() {
        let g = unit(9);
        let f = ComplexField::from_fn(g, |x, y| Complex64::new((3.0 * x).sin(), x * y * y));
        let fine = f.prolongate(33).unwrap();
        let back = fine.restrict(9).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn norms() {
        let g = unit(33);
        let z = ComplexField::zeros(g);
        assert_eq!(z.norm(Norm::L2), 0.0);
        assert_eq!(z.norm(Norm::Linf), 0.0);

        let f = ComplexField::from_fn(g, |x, y| Complex64::new(x - y, x * y));
        let a = 2.5;
        let s = f.scale(-a);
        for kind in [Norm::L2, Norm::Linf] {
            assert!((s.norm(kind) - a * f.norm(kind)).abs() < 1e-13);
        }

        // Exact integral of 1 over the unit square; uniform weights are off by O(h).
        for n in [17, 33, 65, 129] {
            let one = RealField::from_fn(unit(n), |_, _| 1.0);
            let h = 1.0 / (n - 1) as f64;
            assert!((one.norm(Norm::L2) - 1.0).abs() <= 1.5 * h);
        }
    }

    #[test]
    fn l2_norm_self_convergence() {
        // f = x(1-x)y(1-y), ||f||_L2 = 1/30.
        let exact = 1.0 / 30.0;
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let f = RealField::from_fn(unit(n), |x, y| x * (1.0 - x) * y * (1.0 - y));
                (f.norm(Norm::L2) - exact).abs()
            })
            .collect();
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 1.9 && order2 >= 1.9, "orders {order1} {order2}");
    }

    #[test]
    fn extend_and_extract_roundtrip() {
        let inner = unit(5);
        let h = inner.h();
        let outer = Grid::new(9, -2.0 * h, -2.0 * h, 1.0 + 2.0 * h, 1.0 + 2.0 * h).unwrap();
        let f = RealField::from_fn(inner, |x, y| 1.0 + x + 10.0 * y);
        let e = zero_extend(&f, &outer).unwrap();
        assert_eq!(e.at(0, 0), 0.0);
        assert_eq!(e.at(2, 2), f.at(0, 0));
        assert_eq!(e.at(6, 3), f.at(4, 1));
        assert_eq!(extract(&e, &inner).unwrap(), f);
        let misaligned = Grid::new(5, 0.01, 0.0, 1.01, 1.0).unwrap();
        assert!(zero_extend(&f, &misaligned).is_err());
    }
}
