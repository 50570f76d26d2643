//! Multifrontal `L D L^T` factorization for complex symmetric matrices whose
//! graph is (a subgraph of) the 5-point stencil of an `nx x ny` grid.
//!
//! The elimination order is geometric nested dissection: a rectangle is split
//! by its middle grid line, both halves are ordered recursively, then the
//! separator line. Each tree node owns a dense front made of its pivots and
//! the ring of grid nodes around its rectangle; children contribute their
//! Schur complements through extend-add.

use num_complex::Complex64;

use super::dense::partial_ldlt;
use super::CsrMatrix;
use crate::error::{Error, Result};

const LEAF_AREA: usize = 36;
/// Smallest admissible `min|D| / max|D|`.
const MIN_PIVOT_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
struct Rect {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Rect {
    fn width(&self) -> usize {
        self.i1 - self.i0
    }
    fn height(&self) -> usize {
        self.j1 - self.j0
    }
}

#[derive(Debug)]
struct FrontNode {
    pivots: Vec<usize>,
    halo: Vec<usize>,
    children: usize,
    /// Column-major `front_size x pivots.len()`: unit-lower multipliers with
    /// the pivots `D` on the diagonal.
    factor: Vec<Complex64>,
}

impl FrontNode {
    fn size(&self) -> usize {
        self.pivots.len() + self.halo.len()
    }
}

/// Sparse `A = L D L^T` factorization, reusable across right-hand sides and
/// shareable between threads.
#[derive(Debug)]
pub struct GridLdlt {
    dim: usize,
    nodes: Vec<FrontNode>,
    pivot_ratio: f64,
}

impl GridLdlt {
    pub fn factor(matrix: &CsrMatrix, nx: usize, ny: usize) -> Result<Self> {
        let dim = nx * ny;
        if matrix.dim() != dim {
            return Err(Error::Config(format!(
                "matrix of dimension {} does not match a {nx}x{ny} grid",
                matrix.dim()
            )));
        }
        check_stencil(matrix, nx)?;

        let mut nodes = Vec::new();
        dissect(Rect { i0: 0, i1: nx, j0: 0, j1: ny }, nx, ny, &mut nodes);

        let mut position = vec![usize::MAX; dim];
        let mut next = 0;
        for node in &nodes {
            for &p in &node.pivots {
                position[p] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next, dim);

        let mut local = vec![u32::MAX; dim];
        let mut updates: Vec<(Vec<usize>, Vec<Complex64>)> = Vec::new();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;

        for node in nodes.iter_mut() {
            let np = node.pivots.len();
            let f = node.size();
            for (l, &g) in node.pivots.iter().chain(&node.halo).enumerate() {
                local[g] = l as u32;
            }
            let mut front = vec![Complex64::default(); f * f];
            for (a, &p) in node.pivots.iter().enumerate() {
                for (c, v) in matrix.row(p) {
                    if position[c] < position[p] {
                        continue;
                    }
                    let lc = local[c];
                    if lc == u32::MAX {
                        return Err(Error::Config(format!(
                            "entry ({p}, {c}) escapes the dissection front"
                        )));
                    }
                    let lc = lc as usize;
                    let (r, col) = if lc >= a { (lc, a) } else { (a, lc) };
                    front[col * f + r] += v;
                }
            }
            for (child_halo, update) in updates.drain(updates.len() - node.children..) {
                let m = child_halo.len();
                let map: Vec<usize> = child_halo.iter().map(|&g| local[g] as usize).collect();
                for cj in 0..m {
                    for ci in cj..m {
                        let v = update[cj * m + ci];
                        let (a, b) = (map[ci], map[cj]);
                        let (r, col) = if a >= b { (a, b) } else { (b, a) };
                        front[col * f + r] += v;
                    }
                }
            }

            let (lo, hi) = partial_ldlt(&mut front, f, np);
            min_pivot = min_pivot.min(lo);
            max_pivot = max_pivot.max(hi);
            if lo == 0.0 {
                return Err(Error::SolverFailure {
                    message: "zero or non-finite pivot".into(),
                    pivot_ratio: 0.0,
                });
            }

            let nh = f - np;
            let mut update = vec![Complex64::default(); nh * nh];
            for j in 0..nh {
                let src = &front[(np + j) * f + np..(np + j + 1) * f];
                update[j * nh + j..(j + 1) * nh].copy_from_slice(&src[j..]);
            }
            front.truncate(f * np);
            front.shrink_to_fit();
            node.factor = front;
            updates.push((node.halo.clone(), update));

            for &g in node.pivots.iter().chain(&node.halo) {
                local[g] = u32::MAX;
            }
        }

        let pivot_ratio = if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 };
        if pivot_ratio < MIN_PIVOT_RATIO {
            return Err(Error::SolverFailure {
                message: "factorization is numerically singular".into(),
                pivot_ratio,
            });
        }
        Ok(Self { dim, nodes, pivot_ratio })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `min|D| / max|D|`, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    /// Number of stored entries of `L` (including the diagonal).
    pub fn factor_entries(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| {
                let (np, f) = (n.pivots.len(), n.size());
                np * (np + 1) / 2 + (f - np) * np
            })
            .sum()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.dim, "right-hand side has the wrong length");
        let mut x = b.to_vec();
        let mut z = Vec::new();

        for node in &self.nodes {
            let np = node.pivots.len();
            let f = node.size();
            z.clear();
            z.extend(node.pivots.iter().map(|&p| x[p]));
            z.resize(f, Complex64::default());
            for k in 0..np {
                let zk = z[k];
                if zk.re == 0.0 && zk.im == 0.0 {
                    continue;
                }
                let col = &node.factor[k * f..(k + 1) * f];
                for (zi, &l) in z[k + 1..].iter_mut().zip(&col[k + 1..]) {
                    *zi -= l * zk;
                }
            }
            for (k, &p) in node.pivots.iter().enumerate() {
                x[p] = z[k] / node.factor[k * f + k];
            }
            for (r, &g) in node.halo.iter().enumerate() {
                x[g] += z[np + r];
            }
        }

        for node in self.nodes.iter().rev() {
            let np = node.pivots.len();
            let f = node.size();
            z.clear();
            z.extend(node.pivots.iter().map(|&p| x[p]));
            z.extend(node.halo.iter().map(|&g| x[g]));
            for k in (0..np).rev() {
                let col = &node.factor[k * f..(k + 1) * f];
                let dot: Complex64 = z[k + 1..].iter().zip(&col[k + 1..]).map(|(a, b)| a * b).sum();
                z[k] -= dot;
            }
            for (k, &p) in node.pivots.iter().enumerate() {
                x[p] = z[k];
            }
        }
        x
    }
}

fn check_stencil(matrix: &CsrMatrix, nx: usize) -> Result<()> {
    for r in 0..matrix.dim() {
        let (ri, rj) = (r % nx, r / nx);
        for (c, _) in matrix.row(r) {
            let (ci, cj) = (c % nx, c / nx);
            if ri.abs_diff(ci) + rj.abs_diff(cj) > 1 {
                return Err(Error::Config(format!(
                    "entry ({r}, {c}) is not a 5-point stencil neighbour"
                )));
            }
        }
    }
    Ok(())
}

/// Appends the dissection tree of `rect` to `nodes` in postorder.
fn dissect(rect: Rect, nx: usize, ny: usize, nodes: &mut Vec<FrontNode>) {
    let (w, h) = (rect.width(), rect.height());
    let halo = ring(rect, nx, ny);
    if w * h <= LEAF_AREA || w.max(h) < 3 {
        let mut pivots = Vec::with_capacity(w * h);
        for j in rect.j0..rect.j1 {
            for i in rect.i0..rect.i1 {
                pivots.push(j * nx + i);
            }
        }
        nodes.push(FrontNode { pivots, halo, children: 0, factor: Vec::new() });
        return;
    }
    let pivots: Vec<usize>;
    let (first, second);
    if w >= h {
        let mid = rect.i0 + w / 2;
        pivots = (rect.j0..rect.j1).map(|j| j * nx + mid).collect();
        first = Rect { i1: mid, ..rect };
        second = Rect { i0: mid + 1, ..rect };
    } else {
        let mid = rect.j0 + h / 2;
        pivots = (rect.i0..rect.i1).map(|i| mid * nx + i).collect();
        first = Rect { j1: mid, ..rect };
        second = Rect { j0: mid + 1, ..rect };
    }
    dissect(first, nx, ny, nodes);
    dissect(second, nx, ny, nodes);
    nodes.push(FrontNode { pivots, halo, children: 2, factor: Vec::new() });
}

/// Grid nodes outside `rect` that share an edge with it.
fn ring(rect: Rect, nx: usize, ny: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2 * (rect.width() + rect.height()));
    if rect.j0 > 0 {
        out.extend((rect.i0..rect.i1).map(|i| (rect.j0 - 1) * nx + i));
    }
    if rect.i0 > 0 {
        out.extend((rect.j0..rect.j1).map(|j| j * nx + rect.i0 - 1));
    }
    if rect.i1 < nx {
        out.extend((rect.j0..rect.j1).map(|j| j * nx + rect.i1));
    }
    if rect.j1 < ny {
        out.extend((rect.i0..rect.i1).map(|i| rect.j1 * nx + i));
    }
    out
}
