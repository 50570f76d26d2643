//! Data misfit, its adjoint-state gradient and the L-BFGS reconstruction
//! driver.
//!
//! With `S(q) f` the solution of `A(q) u = -k^2 f`,
//! `J(q) = sum_j 1/2 |T S(q)(q u_j) - d_j|^2` and
//! `grad J = sum_j Re(u2_j (u_j + u1_j))`, where `u1_j = S(q)(q u_j)` and
//! `u2_j = S(q) conj(T^T (T u1_j - d_j))`. Both are plain nodal sums, and the
//! gradient is exact for the discrete `J` because `A(q)` is complex
//! symmetric and `T` is real.

mod lbfgs;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lbfgs::{minimize, IterationRecord, LbfgsOptions, LbfgsResult, StopReason};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::measurement::{MeasurementSet, TraceOperator};
use crate::metrics::relative_error;
use crate::pml::{FactoredSystem, PmlConfig, DEFAULT_L_PML};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    pub k: f64,
    pub n: usize,
    #[serde(default = "default_l_pml")]
    pub l_pml: f64,
    #[serde(default)]
    pub lbfgs: LbfgsOptions,
    /// Weight of `1/2 |q|^2`; zero disables it.
    #[serde(default)]
    pub tikhonov: f64,
}

fn default_l_pml() -> f64 {
    DEFAULT_L_PML
}

impl InversionConfig {
    pub fn new(k: f64, n: usize) -> Self {
        Self { k, n, l_pml: DEFAULT_L_PML, lbfgs: LbfgsOptions::default(), tikhonov: 0.0 }
    }

    pub fn pml(&self) -> Result<PmlConfig> {
        PmlConfig::new(self.k, self.n, self.l_pml)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::unit(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.pml()?;
        self.lbfgs.validate()?;
        if !(self.tikhonov >= 0.0 && self.tikhonov.is_finite()) {
            return Err(Error::Config(format!("invalid Tikhonov weight {}", self.tikhonov)));
        }
        Ok(())
    }
}

/// Result of one objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub j: f64,
    pub grad: RealField,
    pub factorizations: usize,
    pub solves: usize,
}

/// `J` and its gradient for fixed data; reusable across evaluations.
#[derive(Debug)]
pub struct Objective<'a> {
    data: &'a MeasurementSet,
    config: InversionConfig,
    pml: PmlConfig,
    trace: TraceOperator,
    incident: Vec<ComplexField>,
    factorizations: AtomicUsize,
    solves: AtomicUsize,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a MeasurementSet, config: InversionConfig) -> Result<Self> {
        config.validate()?;
        if (data.k - config.k).abs() > 1e-12 * config.k {
            return Err(Error::Config(format!(
                "data were recorded at k = {}, inversion uses k = {}",
                data.k, config.k
            )));
        }
        let grid = config.grid()?;
        let pml = config.pml()?;
        let trace = TraceOperator::new(&data.layout, grid)?;
        let incident = data.layout.incident_fields(grid, config.k);
        Ok(Self {
            data,
            config,
            pml,
            trace,
            incident,
            factorizations: AtomicUsize::new(0),
            solves: AtomicUsize::new(0),
        })
    }

    pub fn grid(&self) -> Grid {
        self.pml.interior_grid()
    }

    pub fn config(&self) -> &InversionConfig {
        &self.config
    }

    /// Factorizations performed over the objective's lifetime.
    pub fn factorizations(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    /// Triangular solves performed over the objective's lifetime.
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, q: &RealField) -> Result<Evaluation> {
        q.ensure_grid(&self.grid())?;
        let solver = FactoredSystem::new(q, self.pml)?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        let per_source = (0..self.data.m())
            .into_par_iter()
            .map(|j| self.source_term(&solver, q, j))
            .collect::<Result<Vec<_>>>()?;
        let n_nodes = self.grid().len();
        let mut j_total = 0.0;
        let mut grad = vec![0.0; n_nodes];
        for (jj, g) in per_source {
            j_total += jj;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        if self.config.tikhonov > 0.0 {
            let alpha = self.config.tikhonov;
            j_total += 0.5 * alpha * q.values().iter().map(|v| v * v).sum::<f64>();
            grad.iter_mut().zip(q.values()).for_each(|(g, v)| *g += alpha * v);
        }
        let solves = solver.solve_count();
        self.solves.fetch_add(solves, Ordering::Relaxed);
        Ok(Evaluation {
            j: j_total,
            grad: RealField::new(self.grid(), grad)?,
            factorizations: 1,
            solves,
        })
    }

    fn source_term(&self, solver: &FactoredSystem, q: &RealField, j: usize) -> Result<(f64, Vec<f64>)> {
        let u_inc = &self.incident[j];
        let u1 = solver.solve_source(&u_inc.zip_with(q, |u, qv| u * qv)?)?;
        let residual: Vec<Complex64> = self
            .trace
            .apply(&u1)?
            .iter()
            .zip(self.data.source(j))
            .map(|(a, b)| a - b)
            .collect();
        let misfit = 0.5 * residual.iter().map(|r| r.norm_sqr()).sum::<f64>();
        let u2 = solver.solve_source(&self.trace.adjoint(&residual)?.conj())?;
        let grad = u2
            .values()
            .iter()
            .zip(u_inc.values())
            .zip(u1.values())
            .map(|((a, b), c)| (a * (b + c)).re)
            .collect();
        Ok((misfit, grad))
    }
}

pub fn objective_and_gradient(
    q: &RealField,
    data: &MeasurementSet,
    config: InversionConfig,
) -> Result<Evaluation> {
    Objective::new(data, config)?.evaluate(q)
}

/// Largest `|<S f, g> - <f, conj(S conj g)>| / (|f| |g|)` over random pairs,
/// with `<a, b> = sum a conj(b)`.
pub fn check_adjoint_identity(q: &RealField, pml: PmlConfig, seed: u64, pairs: usize) -> Result<f64> {
    let solver = FactoredSystem::new(q, pml)?;
    let grid = pml.interior_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_field = |rng: &mut ChaCha8Rng| {
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        ComplexField::new(grid, values)
    };
    let euclid = |f: &ComplexField| f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let f = random_field(&mut rng)?;
        let g = random_field(&mut rng)?;
        let lhs = solver.solve_source(&f)?.dot(&g);
        let rhs = f.dot(&solver.solve_source(&g.conj())?.conj());
        worst = worst.max((lhs - rhs).norm() / (euclid(&f) * euclid(&g)));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct InversionState {
    pub q: RealField,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
    pub n_fev: usize,
    pub factorizations: usize,
    pub solves: usize,
    pub elapsed_s: f64,
}

impl InversionState {
    pub fn final_j(&self) -> f64 {
        self.history.last().map(|r| r.j).unwrap_or(f64::NAN)
    }

    pub fn initial_j(&self) -> f64 {
        self.history.first().map(|r| r.j).unwrap_or(f64::NAN)
    }

    /// Iteration log with header `iter,J,grad_norm,rel_err,n_fev,elapsed_s`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,J,grad_norm,rel_err,n_fev,elapsed_s\n");
        for r in &self.history {
            let rel = r.rel_err.map(|v| format!("{v:.17e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{},{},{:.3}\n",
                r.iter, r.j, r.grad_norm, rel, r.n_fev, r.elapsed_s
            ));
        }
        out
    }
}

/// Reconstructs `q` from `data` by L-BFGS, starting from `q0` (zero if absent).
pub fn lbfgs_minimize(
    data: &MeasurementSet,
    config: InversionConfig,
    q0: Option<&RealField>,
    truth: Option<&RealField>,
) -> Result<InversionState> {
    let start = Instant::now();
    let objective = Objective::new(data, config)?;
    let grid = objective.grid();
    let x0 = match q0 {
        Some(q) => {
            q.ensure_grid(&grid)?;
            q.values().to_vec()
        }
        None => vec![0.0; grid.len()],
    };
    if let Some(t) = truth {
        t.ensure_grid(&grid)?;
    }
    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let e = objective.evaluate(&RealField::new(grid, x.to_vec())?)?;
        Ok((e.j, e.grad.into_values()))
    };
    let monitor = |x: &[f64]| {
        let t = truth?;
        relative_error(&RealField::new(grid, x.to_vec()).ok()?, t).ok()
    };
    let result = minimize(eval, x0, &config.lbfgs, monitor)?;
    Ok(InversionState {
        q: RealField::new(grid, result.x)?,
        history: result.history,
        stop: result.stop,
        n_fev: result.n_fev,
        factorizations: objective.factorizations(),
        solves: objective.solves(),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
