use invmed_core::lippmann::{
    apply_s_hat, disk_hankel_integral, estimate_contraction, green_kernel, neumann_forward,
    GreenKernel,
};
use invmed_core::special::hankel1;
use invmed_core::{ComplexField, Grid, Norm, RealField};
use num_complex::Complex64;

fn bump(x: f64, y: f64, cx: f64, cy: f64, radius: f64) -> f64 {
    let r2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (radius * radius);
    if r2 < 1.0 {
        (1.0 - r2).powi(4)
    } else {
        0.0
    }
}

/// Adaptive Simpson quadrature, test-only oracle.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 60)
}

#[test]
fn self_cell_closed_form_matches_quadrature() {
    for &(k, h) in &[(20.0, 1.0 / 128.0), (40.0, 1.0 / 128.0), (10.0, 1.0 / 32.0), (60.0, 1.0 / 64.0)] {
        let rho = h / std::f64::consts::PI.sqrt();
        let closed = disk_hankel_integral(k, rho).unwrap();
        // Integrand vanishes like r ln r at the origin; start at a tiny offset.
        let eps = 1e-300;
        let re = adaptive_simpson(&|r: f64| if r < eps { 0.0 } else { hankel1(0, k * r).unwrap().re * r }, 0.0, rho, 1e-20);
        let im = adaptive_simpson(&|r: f64| if r < eps { 0.0 } else { hankel1(0, k * r).unwrap().im * r }, 0.0, rho, 1e-20);
        let quad = Complex64::new(re, im);
        assert!((closed - quad).norm() <= 1e-8 * closed.norm(), "k={k}: {closed} vs {quad}");
    }
}

#[test]
fn zero_input_and_linearity() {
    let grid = Grid::unit(33).unwrap();
    let kernel = GreenKernel::new(15.0, grid).unwrap();
    let zero = apply_s_hat(&ComplexField::zeros(grid), &kernel).unwrap();
    assert!(zero.values().iter().all(|v| v.norm() == 0.0));

    let f = ComplexField::from_fn(grid, |x, y| Complex64::new((5.0 * x).sin(), x * y));
    let g = ComplexField::from_fn(grid, |x, y| Complex64::new(y - 0.3 * x, (7.0 * y).cos()));
    let (a, b) = (Complex64::new(0.7, -1.3), Complex64::new(-2.0, 0.4));
    let combo = f.zip_with(&g, |u, v| a * u + b * v).unwrap();
    let lhs = kernel.apply(&combo).unwrap();
    let rhs = kernel
        .apply(&f)
        .unwrap()
        .zip_with(&kernel.apply(&g).unwrap(), |u, v| a * u + b * v)
        .unwrap();
    let diff = lhs.zip_with(&rhs, |u, v| u - v).unwrap().norm(Norm::Linf);
    assert!(diff <= 1e-12 * rhs.norm(Norm::Linf), "{diff}");
}

#[test]
fn interior_helmholtz_residual() {
    let (k, n) = (20.0, 129);
    let grid = Grid::unit(n).unwrap();
    let kernel = GreenKernel::new(k, grid).unwrap();
    let f = ComplexField::from_fn(grid, |x, y| Complex64::new(bump(x, y, 0.5, 0.45, 0.25), 0.0));
    let u = kernel.apply(&f).unwrap();
    let h = grid.h();
    let (mut res2, mut f2) = (0.0, 0.0);
    for j in 2..n - 2 {
        for i in 2..n - 2 {
            let lap = (u.at(i + 1, j) + u.at(i - 1, j) + u.at(i, j + 1) + u.at(i, j - 1)
                - u.at(i, j) * 4.0)
                / (h * h);
            let r = lap + u.at(i, j) * k * k + f.at(i, j) * k * k;
            res2 += r.norm_sqr();
            f2 += (f.at(i, j) * k * k).norm_sqr();
        }
    }
    let rel = (res2 / f2).sqrt();
    assert!(rel <= 0.02, "relative residual {rel}");
}

#[test]
fn symmetry_of_the_pairing() {
    // sum (S f) g == sum f (S g) without conjugation.
    let grid = Grid::unit(17).unwrap();
    let kernel = GreenKernel::new(9.0, grid).unwrap();
    let f = ComplexField::from_fn(grid, |x, y| Complex64::new(x * x, y - x));
    let g = ComplexField::from_fn(grid, |x, y| Complex64::new((3.0 * y).sin(), 1.0 + x));
    let sf = kernel.apply(&f).unwrap();
    let sg = kernel.apply(&g).unwrap();
    let lhs: Complex64 = sf.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
    let rhs: Complex64 = f.values().iter().zip(sg.values()).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm());
}

#[test]
fn neumann_with_zero_scatterer() {
    let grid = Grid::unit(33).unwrap();
    let kernel = GreenKernel::new(10.0, grid).unwrap();
    let q = RealField::zeros(grid);
    let inc = ComplexField::plane_wave(grid, 10.0, 0.3);
    let (u, diag) = neumann_forward(&q, &inc, &kernel, 4).unwrap();
    assert!(u.is_zero());
    assert_eq!(diag.term_norms, vec![0.0; 4]);
    assert!(diag.converged);
    assert!(neumann_forward(&q, &inc, &kernel, 0).is_err());
}

#[test]
fn born_is_first_term() {
    let grid = Grid::unit(33).unwrap();
    let kernel = GreenKernel::new(10.0, grid).unwrap();
    let q = RealField::from_fn(grid, |x, y| 0.1 * bump(x, y, 0.5, 0.5, 0.3));
    let inc = ComplexField::plane_wave(grid, 10.0, 1.0);
    let (u, diag) = neumann_forward(&q, &inc, &kernel, 1).unwrap();
    let born = kernel.apply(&inc.zip_with(&q, |a, b| a * b).unwrap()).unwrap();
    assert_eq!(u, born);
    assert_eq!(diag.order, 1);
}

#[test]
fn contraction_estimate_properties() {
    let grid = Grid::unit(65).unwrap();
    let kernel = GreenKernel::new(20.0, grid).unwrap();
    assert_eq!(estimate_contraction(&RealField::zeros(grid), &kernel, 10).unwrap(), 0.0);
    assert!(estimate_contraction(&RealField::zeros(grid), &kernel, 4).is_err());

    let q = RealField::from_fn(grid, |x, y| {
        bump(x, y, 0.4, 0.55, 0.2) - 0.6 * bump(x, y, 0.65, 0.4, 0.15)
    });
    let q = q.scale(0.05 / q.norm(Norm::Linf));
    let base = estimate_contraction(&q, &kernel, 20).unwrap();
    assert!(base > 0.0 && base < 1.0, "{base}");
    for alpha in [3.0, -0.5, 12.0] {
        let scaled = estimate_contraction(&q.scale(alpha), &kernel, 20).unwrap();
        assert!((scaled - alpha.abs() * base).abs() <= 1e-10 * scaled.max(1.0), "{alpha}");
    }
}

#[test]
fn geometric_decay_below_the_contraction_bound() {
    let grid = Grid::unit(65).unwrap();
    let kernel = GreenKernel::new(20.0, grid).unwrap();
    let q = RealField::from_fn(grid, |x, y| bump(x, y, 0.5, 0.5, 0.3));
    for magnitude in [0.02, 0.05, 0.1] {
        let q = q.scale(magnitude);
        let est = estimate_contraction(&q, &kernel, 30).unwrap();
        if est >= 0.9 {
            continue;
        }
        let inc = ComplexField::plane_wave(grid, 20.0, 0.0);
        let (_, diag) = neumann_forward(&q, &inc, &kernel, 8).unwrap();
        for w in diag.term_norms.windows(2) {
            assert!(w[1] / w[0] <= est + 0.1, "ratio {} vs estimate {est}", w[1] / w[0]);
        }
    }
}

#[test]
fn fixed_point_residual_shrinks_with_order() {
    let grid = Grid::unit(65).unwrap();
    let kernel = GreenKernel::new(20.0, grid).unwrap();
    let q = RealField::from_fn(grid, |x, y| 0.05 * bump(x, y, 0.5, 0.5, 0.3));
    let inc = ComplexField::plane_wave(grid, 20.0, 0.7);
    let born = kernel.apply(&inc.zip_with(&q, |a, b| a * b).unwrap()).unwrap();
    let mut last = f64::INFINITY;
    for order in [2, 4, 6] {
        let (u, diag) = neumann_forward(&q, &inc, &kernel, order).unwrap();
        let su = kernel.apply(&u.zip_with(&q, |a, b| a * b).unwrap()).unwrap();
        let res = u
            .zip_with(&su, |a, b| a - b)
            .unwrap()
            .zip_with(&born, |a, b| a - b)
            .unwrap()
            .norm(Norm::L2);
        // Residual equals the next term exactly: U - S(qU) - S(q u_inc) = -u^(L+1).
        let (_, next) = neumann_forward(&q, &inc, &kernel, order + 1).unwrap();
        let expected = next.term_norms[order];
        assert!((res - expected).abs() <= 1e-10 * expected.max(1e-300), "{res} vs {expected}");
        assert!(res < last);
        last = res;
        assert_eq!(diag.term_norms.len(), order);
    }
}

#[test]
fn kernel_matches_direct_green_function() {
    let grid = Grid::unit(9).unwrap();
    let k = 30.0;
    let kernel = GreenKernel::new(k, grid).unwrap();
    let h = grid.h();
    let expected = -k * k * h * h * green_kernel(k, h * 5f64.sqrt()).unwrap();
    assert_eq!(kernel.weight(1, -2), expected);
}
