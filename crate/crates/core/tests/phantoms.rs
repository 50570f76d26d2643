use invmed_core::phantoms::{
    make_geometric, normalize_max, sample_gaussian_mixture, two_gauss_raw, two_gauss_test,
    GaussianMixtureSpec, GeometricKind, GeometricPhantom, Phantom, Shape,
};
use invmed_core::{Error, Grid, Norm, RealField};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::unit(129).unwrap()
}

fn vanishes_outside_support(q: &RealField) {
    let g = q.grid();
    for j in 0..g.n() {
        for i in 0..g.n() {
            let (x, y) = (g.x(i), g.y(j));
            if !(0.1..=0.9).contains(&x) || !(0.1..=0.9).contains(&y) {
                assert_eq!(q.at(i, j), 0.0, "nonzero at ({x}, {y})");
            }
        }
    }
}

#[test]
fn mixture_parameters_follow_their_laws() {
    let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut etas = [0usize; 7];
    let mut draws = 0;
    for seed in 0..400 {
        let spec = GaussianMixtureSpec::draw(seed);
        etas[spec.eta()] += 1;
        for c in &spec.components {
            for v in [c.a, c.c] {
                assert!((100.0..=200.0).contains(&v));
                amin = amin.min(v);
                amax = amax.max(v);
                draws += 1;
            }
            assert!((0.2..=0.8).contains(&c.b) && (0.2..=0.8).contains(&c.d));
            assert!((-1.0..=1.0).contains(&c.lambda));
        }
    }
    assert!(draws >= 1000);
    assert!(amin < 101.0 && amax > 199.0, "empirical range [{amin}, {amax}]");
    assert_eq!(etas[0], 0);
    assert!(etas[1..].iter().all(|&c| c > 0));
}

#[test]
fn mixture_is_reproducible_and_compactly_supported() {
    let (s1, q1) = sample_gaussian_mixture(grid(), 42);
    let (s2, q2) = sample_gaussian_mixture(grid(), 42);
    assert_eq!(s1, s2);
    assert_eq!(q1.values(), q2.values());
    let (_, q3) = sample_gaussian_mixture(grid(), 43);
    assert_ne!(q1.values(), q3.values());
    for seed in 0..20 {
        vanishes_outside_support(&sample_gaussian_mixture(grid(), seed).1);
    }
}

#[test]
fn normalization() {
    let (_, q) = sample_gaussian_mixture(grid(), 7);
    let out = normalize_max(&q, 0.1).unwrap();
    assert!((out.norm(Norm::Linf) - 0.1).abs() <= 1e-15);
    let again = normalize_max(&out, 0.1).unwrap();
    assert_eq!(again.values(), out.values());
    let argmax = |f: &RealField| {
        f.values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0
    };
    assert_eq!(argmax(&q), argmax(&out));
    assert!(q.values().iter().zip(out.values()).all(|(a, b)| a.signum() == b.signum() || *a == 0.0));
    assert!(matches!(normalize_max(&RealField::zeros(grid()), 0.1), Err(Error::Degenerate(_))));
    assert!(normalize_max(&q, 0.0).is_err());
}

#[test]
fn two_gauss_target() {
    let raw = two_gauss_raw(0.3, 0.6);
    // The second bump contributes 0.7 exp(-40*0.16 - 90*0.04) = 0.7 e^-10.
    assert!((raw - (1.0 - 0.7 * (-10.0f64).exp())).abs() < 1e-15);
    assert!((raw - 0.9999682).abs() < 1e-7);
    for magnitude in [0.1, 0.4] {
        let q = two_gauss_test(grid(), magnitude).unwrap();
        assert!((q.norm(Norm::Linf) - magnitude).abs() < 1e-15);
        vanishes_outside_support(&q);
        // The positive lobe dominates.
        let peak = q.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((peak - magnitude).abs() < 1e-15);
    }
}

#[test]
fn single_disc_indicator() {
    let ph = GeometricPhantom {
        kind: GeometricKind::Discs,
        shapes: vec![Shape::Disc { center: [0.5, 0.5], radius: 0.2 }],
        magnitude: 0.6,
    };
    let q = make_geometric(&ph, grid()).unwrap();
    let g = q.grid();
    for j in 0..g.n() {
        for i in 0..g.n() {
            let r2 = (g.x(i) - 0.5).powi(2) + (g.y(j) - 0.5).powi(2);
            let expected = if r2 <= 0.04 { 0.6 } else { 0.0 };
            assert_eq!(q.at(i, j), expected);
        }
    }
}

#[test]
fn geometric_presets() {
    for kind in GeometricKind::ALL {
        let q = make_geometric(&GeometricPhantom::preset(kind, 0.5), grid()).unwrap();
        assert!((q.norm(Norm::Linf) - 0.5).abs() < 1e-15, "{kind:?}");
        vanishes_outside_support(&q);
    }
    let cluster = GeometricKind::SmallCluster.shapes();
    assert!(cluster.len() >= 4);
    assert!(cluster.iter().all(|s| matches!(s, Shape::Disc { radius, .. } if *radius <= 0.05)));
    let austria = GeometricKind::Austria.shapes();
    assert_eq!(austria.iter().filter(|s| matches!(s, Shape::Disc { .. })).count(), 2);
    assert_eq!(austria.iter().filter(|s| matches!(s, Shape::Annulus { .. })).count(), 1);
}

#[test]
fn geometric_errors() {
    let outside = GeometricPhantom {
        kind: GeometricKind::Discs,
        shapes: vec![Shape::Disc { center: [0.2, 0.5], radius: 0.1 }],
        magnitude: 1.0,
    };
    assert!(matches!(make_geometric(&outside, grid()), Err(Error::ShapeOutOfBounds(_))));
    let empty = GeometricPhantom { kind: GeometricKind::Discs, shapes: vec![], magnitude: 1.0 };
    assert!(matches!(make_geometric(&empty, grid()), Err(Error::Degenerate(_))));
}

#[test]
fn phantom_names() {
    assert!(Phantom::from_name("gaussian_mixture", 0.1, None).is_err());
    let p = Phantom::from_name("austria", 0.5, None).unwrap();
    assert_eq!(p.name(), "austria");
    assert_eq!(p.magnitude(), 0.5);
    assert!(Phantom::from_name("unicorn", 0.5, None).is_err());
    let q = Phantom::from_name("two_gauss", 0.1, None).unwrap().render(grid()).unwrap();
    assert_eq!(q.values(), two_gauss_test(grid(), 0.1).unwrap().values());
}

proptest! {
    #[test]
    fn normalize_is_idempotent(seed in 0u64..1000, target in 0.01f64..2.0) {
        let (_, q) = sample_gaussian_mixture(Grid::unit(33).unwrap(), seed);
        prop_assume!(!q.is_zero());
        let once = normalize_max(&q, target).unwrap();
        let twice = normalize_max(&once, target).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() <= 1e-15 * target);
        }
    }
}
