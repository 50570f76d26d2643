//! Dense kernels for frontal matrices: partial `L D L^T` of a complex
//! symmetric (not Hermitian) matrix stored column-major, lower triangle only.

use num_complex::Complex64;
use rayon::prelude::*;

const PANEL: usize = 48;
/// Trailing columns handed to one rayon task.
const PAR_COLUMNS: usize = 16;

/// Eliminates the first `np` variables of the `f x f` front in place.
///
/// On return, column `k < np` holds `D_k` on the diagonal and the multipliers
/// `L_ik` below it; the trailing `(f - np)` block holds the Schur complement
/// (lower triangle). Returns the smallest and largest pivot moduli.
pub(crate) fn partial_ldlt(front: &mut [Complex64], f: usize, np: usize) -> (f64, f64) {
    debug_assert_eq!(front.len(), f * f);
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot: f64 = 0.0;
    let mut k0 = 0;
    while k0 < np {
        let k1 = (k0 + PANEL).min(np);
        for k in k0..k1 {
            let d = front[k * f + k];
            min_pivot = min_pivot.min(d.norm());
            max_pivot = max_pivot.max(d.norm());
            if d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite() {
                return (0.0, max_pivot);
            }
            let inv = d.inv();
            let (head, tail) = front.split_at_mut((k + 1) * f);
            let col_k = &head[k * f..];
            // Update the remaining panel columns with the unscaled column k.
            for (offset, col_j) in tail.chunks_exact_mut(f).take(k1 - k - 1).enumerate() {
                let j = k + 1 + offset;
                let l_j = col_k[j] * inv;
                for i in j..f {
                    col_j[i] -= col_k[i] * l_j;
                }
            }
            for v in &mut head[k * f + k + 1..(k + 1) * f] {
                *v *= inv;
            }
        }
        if k1 < f {
            trailing_update(front, f, k0, k1);
        }
        k0 = k1;
    }
    (min_pivot, max_pivot)
}

/// `F[i, j] -= sum_{k in k0..k1} L[i, k] D_k L[j, k]` for `j >= k1`, `i >= j`.
fn trailing_update(front: &mut [Complex64], f: usize, k0: usize, k1: usize) {
    let (panel, trailing) = front.split_at_mut(k1 * f);
    let panel = &panel[k0 * f..];
    let width = k1 - k0;
    let diag: Vec<Complex64> = (0..width).map(|kk| panel[kk * f + k0 + kk]).collect();
    trailing
        .par_chunks_mut(f * PAR_COLUMNS)
        .enumerate()
        .for_each(|(chunk, cols)| {
            for (c, col_j) in cols.chunks_exact_mut(f).enumerate() {
                let j = k1 + chunk * PAR_COLUMNS + c;
                for kk in 0..width {
                    let l_col = &panel[kk * f..(kk + 1) * f];
                    let w = l_col[j] * diag[kk];
                    if w.re == 0.0 && w.im == 0.0 {
                        continue;
                    }
                    for (dst, &l) in col_j[j..].iter_mut().zip(&l_col[j..]) {
                        *dst -= l * w;
                    }
                }
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(f: usize, seed: u64) -> Vec<Complex64> {
        // Small LCG; diagonally weighted so no pivoting is needed.
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = vec![Complex64::default(); f * f];
        for j in 0..f {
            for i in j..f {
                let v = Complex64::new(next(), next());
                a[j * f + i] = v;
                a[i * f + j] = v;
            }
            a[j * f + j] += Complex64::new(f as f64, 0.5 * f as f64);
        }
        a
    }

    #[test]
    fn full_factorization_reconstructs_matrix() {
        let f = 130;
        let a = random_symmetric(f, 7);
        let mut work = a.clone();
        let (lo, hi) = partial_ldlt(&mut work, f, f);
        assert!(lo > 0.0 && hi >= lo);
        for j in 0..f {
            for i in j..f {
                let mut s = Complex64::default();
                for k in 0..=j {
                    let lik = if i == k { Complex64::new(1.0, 0.0) } else { work[k * f + i] };
                    let ljk = if j == k { Complex64::new(1.0, 0.0) } else { work[k * f + j] };
                    s += lik * work[k * f + k] * ljk;
                }
                assert!((s - a[j * f + i]).norm() < 1e-10, "({i},{j})");
            }
        }
    }

    #[test]
    fn partial_factorization_leaves_schur_complement() {
        let (f, np) = (111, 60);
        let a = random_symmetric(f, 3);
        let mut work = a.clone();
        partial_ldlt(&mut work, f, np);
        let mut full = a.clone();
        partial_ldlt(&mut full, f, f);
        // Factoring the Schur complement must reproduce the trailing factor.
        let nh = f - np;
        let mut schur = vec![Complex64::default(); nh * nh];
        for j in 0..nh {
            for i in j..nh {
                schur[j * nh + i] = work[(np + j) * f + np + i];
            }
        }
        partial_ldlt(&mut schur, nh, nh);
        for j in 0..nh {
            for i in j..nh {
                let expected = full[(np + j) * f + np + i];
                assert!((schur[j * nh + i] - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = vec![Complex64::default(); 4];
        a[3] = Complex64::new(1.0, 0.0);
        let (lo, _) = partial_ldlt(&mut a, 2, 2);
        assert_eq!(lo, 0.0);
    }
}
