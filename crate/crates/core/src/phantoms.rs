//! Scatterer generators: random Gaussian mixtures, the two-Gaussian test
//! target and piecewise-constant geometric phantoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Norm, RealField};

pub const MIXTURE_R: f64 = 200.0;
pub const MAX_COMPONENTS: usize = 6;
pub const CENTER_RANGE: (f64, f64) = (0.2, 0.8);
/// Smooth fields vanish outside this square.
pub const SUPPORT: (f64, f64) = (0.1, 0.9);
/// Geometric shapes must fit inside this square.
pub const SHAPE_BOX: (f64, f64) = (0.15, 0.85);

/// `1` on `[0.2, 0.8]`, `0` outside `[0.1, 0.9]`, quintic smoothstep between.
pub fn support_taper(t: f64) -> f64 {
    let d = t.min(1.0 - t) - SUPPORT.0;
    if d <= 0.0 {
        return 0.0;
    }
    let s = (d / (CENTER_RANGE.0 - SUPPORT.0)).min(1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GaussianComponent {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.lambda * (-self.a * (x - self.b).powi(2) - self.c * (y - self.d).powi(2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub seed: u64,
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixtureSpec {
    pub fn eta(&self) -> usize {
        self.components.len()
    }

    pub fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = rng.random_range(1..=MAX_COMPONENTS);
        let components = (0..eta)
            .map(|_| GaussianComponent {
                lambda: rng.random_range(-1.0..=1.0),
                a: rng.random_range(MIXTURE_R / 2.0..=MIXTURE_R),
                b: rng.random_range(CENTER_RANGE.0..=CENTER_RANGE.1),
                c: rng.random_range(MIXTURE_R / 2.0..=MIXTURE_R),
                d: rng.random_range(CENTER_RANGE.0..=CENTER_RANGE.1),
            })
            .collect();
        Self { seed, components }
    }

    /// Mixture times the support taper, before any normalization.
    pub fn render(&self, grid: Grid) -> RealField {
        RealField::from_fn(grid, |x, y| {
            let sum: f64 = self.components.iter().map(|g| g.eval(x, y)).sum();
            sum * support_taper(x) * support_taper(y)
        })
    }
}

pub fn sample_gaussian_mixture(grid: Grid, seed: u64) -> (GaussianMixtureSpec, RealField) {
    let spec = GaussianMixtureSpec::draw(seed);
    let field = spec.render(grid);
    (spec, field)
}

/// Rescales `q` so that `max|q| = target`.
pub fn normalize_max(q: &RealField, target: f64) -> Result<RealField> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Config(format!("target magnitude must be positive, got {target}")));
    }
    let peak = q.norm(Norm::Linf);
    if peak == 0.0 {
        return Err(Error::Degenerate("cannot normalize an identically zero field".into()));
    }
    if peak == target {
        return Ok(q.clone());
    }
    Ok(q.map(|v| v / peak * target))
}

/// `exp(-150(x-0.3)^2 - 70(y-0.6)^2) - 0.7 exp(-40(x-0.7)^2 - 90(y-0.4)^2)`
/// before tapering.
pub fn two_gauss_raw(x: f64, y: f64) -> f64 {
    (-150.0 * (x - 0.3).powi(2) - 70.0 * (y - 0.6).powi(2)).exp()
        - 0.7 * (-40.0 * (x - 0.7).powi(2) - 90.0 * (y - 0.4).powi(2)).exp()
}

pub fn two_gauss_test(grid: Grid, magnitude: f64) -> Result<RealField> {
    let q = RealField::from_fn(grid, |x, y| two_gauss_raw(x, y) * support_taper(x) * support_taper(y));
    normalize_max(&q, magnitude)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Disc { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disc { center, radius } => {
                (x - center[0]).powi(2) + (y - center[1]).powi(2) <= radius * radius
            }
            Shape::Annulus { center, inner, outer } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                r2 >= inner * inner && r2 <= outer * outer
            }
            Shape::Rect { min, max } => x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1],
        }
    }

    /// `[xmin, ymin, xmax, ymax]`
    pub fn bounding_box(&self) -> [f64; 4] {
        match *self {
            Shape::Disc { center, radius: r } | Shape::Annulus { center, outer: r, .. } => {
                [center[0] - r, center[1] - r, center[0] + r, center[1] + r]
            }
            Shape::Rect { min, max } => [min[0], min[1], max[0], max[1]],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disc { radius, .. } => radius > 0.0,
            Shape::Annulus { inner, outer, .. } => inner >= 0.0 && outer > inner,
            Shape::Rect { min, max } => max[0] > min[0] && max[1] > min[1],
        };
        let [x0, y0, x1, y1] = self.bounding_box();
        let (lo, hi) = SHAPE_BOX;
        if !ok || [x0, y0, x1, y1].iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeOutOfBounds(format!("degenerate shape {self:?}")));
        }
        if x0 < lo || y0 < lo || x1 > hi || y1 > hi {
            return Err(Error::ShapeOutOfBounds(format!("{self:?} leaves [{lo}, {hi}]^2")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricKind {
    Discs,
    RectangleRobot,
    Austria,
    SmallCluster,
}

impl GeometricKind {
    pub const ALL: [GeometricKind; 4] =
        [Self::Discs, Self::RectangleRobot, Self::Austria, Self::SmallCluster];

    pub fn name(self) -> &'static str {
        match self {
            Self::Discs => "discs",
            Self::RectangleRobot => "rectangle_robot",
            Self::Austria => "austria",
            Self::SmallCluster => "small_cluster",
        }
    }

    pub fn shapes(self) -> Vec<Shape> {
        let disc = |x, y, r| Shape::Disc { center: [x, y], radius: r };
        let rect = |x0, y0, x1, y1| Shape::Rect { min: [x0, y0], max: [x1, y1] };
        match self {
            Self::Discs => vec![disc(0.4, 0.45, 0.15), disc(0.58, 0.58, 0.13), disc(0.62, 0.36, 0.09)],
            Self::RectangleRobot => vec![
                rect(0.35, 0.30, 0.65, 0.60),
                rect(0.43, 0.63, 0.57, 0.76),
                rect(0.20, 0.45, 0.32, 0.52),
                rect(0.68, 0.45, 0.80, 0.52),
                rect(0.38, 0.16, 0.46, 0.27),
                rect(0.54, 0.16, 0.62, 0.27),
            ],
            Self::Austria => vec![
                disc(0.35, 0.65, 0.1),
                disc(0.65, 0.65, 0.1),
                Shape::Annulus { center: [0.5, 0.35], inner: 0.08, outer: 0.15 },
            ],
            Self::SmallCluster => vec![
                disc(0.30, 0.30, 0.04),
                disc(0.50, 0.27, 0.035),
                disc(0.70, 0.33, 0.04),
                disc(0.33, 0.68, 0.035),
                disc(0.52, 0.72, 0.04),
                disc(0.70, 0.64, 0.03),
            ],
        }
    }
}

impl std::str::FromStr for GeometricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown geometric phantom '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricPhantom {
    pub kind: GeometricKind,
    pub shapes: Vec<Shape>,
    pub magnitude: f64,
}

impl GeometricPhantom {
    pub fn preset(kind: GeometricKind, magnitude: f64) -> Self {
        Self { kind, shapes: kind.shapes(), magnitude }
    }
}

/// Sum of shape indicators sampled at the nodes, rescaled to the magnitude.
pub fn make_geometric(phantom: &GeometricPhantom, grid: Grid) -> Result<RealField> {
    for s in &phantom.shapes {
        s.validate()?;
    }
    let q = RealField::from_fn(grid, |x, y| {
        phantom.shapes.iter().filter(|s| s.contains(x, y)).count() as f64
    });
    normalize_max(&q, phantom.magnitude)
}

/// Any scatterer the command line can name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phantom {
    GaussianMixture { seed: u64, magnitude: f64 },
    TwoGauss { magnitude: f64 },
    Geometric { shape: GeometricKind, magnitude: f64 },
}

impl Phantom {
    pub fn name(&self) -> &'static str {
        match self {
            Phantom::GaussianMixture { .. } => "gaussian_mixture",
            Phantom::TwoGauss { .. } => "two_gauss",
            Phantom::Geometric { shape, .. } => shape.name(),
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            Phantom::GaussianMixture { magnitude, .. }
            | Phantom::TwoGauss { magnitude }
            | Phantom::Geometric { magnitude, .. } => magnitude,
        }
    }

    /// Parses a phantom name; `seed` is required by the random mixture only.
    pub fn from_name(name: &str, magnitude: f64, seed: Option<u64>) -> Result<Self> {
        match name {
            "gaussian_mixture" => {
                let seed = seed.ok_or_else(|| {
                    Error::Config("the gaussian_mixture phantom needs a seed".into())
                })?;
                Ok(Phantom::GaussianMixture { seed, magnitude })
            }
            "two_gauss" => Ok(Phantom::TwoGauss { magnitude }),
            other => Ok(Phantom::Geometric { shape: other.parse()?, magnitude }),
        }
    }

    pub fn render(&self, grid: Grid) -> Result<RealField> {
        match self {
            Phantom::GaussianMixture { seed, magnitude } => {
                normalize_max(&sample_gaussian_mixture(grid, *seed).1, *magnitude)
            }
            Phantom::TwoGauss { magnitude } => two_gauss_test(grid, *magnitude),
            Phantom::Geometric { shape, magnitude } => {
                make_geometric(&GeometricPhantom::preset(*shape, *magnitude), grid)
            }
        }
    }
}
