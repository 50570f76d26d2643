//! Limited-memory BFGS with a strong Wolfe line search (cubic interpolation,
//! bracketing then zoom), for objectives on `R^n`.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub max_linesearch: usize,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { max_iter: 15, max_linesearch: 20, memory: 10, c1: 1e-4, c2: 0.9, grad_tol: 1e-12 }
    }
}

impl LbfgsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1={}, c2={}",
                self.c1, self.c2
            )));
        }
        if self.max_iter == 0 || self.max_linesearch == 0 || self.memory == 0 {
            return Err(Error::Config(
                "max_iter, max_linesearch and memory must be at least 1".into(),
            ));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::Config(format!("invalid gradient tolerance {}", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    LineSearchLimit,
    GradientTolerance,
    /// The search direction stopped being a descent direction, or the
    /// bracket collapsed below resolution.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub rel_err: Option<f64>,
    /// Cumulative objective evaluations (each also yields a gradient).
    pub n_fev: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    /// Lowest-objective iterate visited.
    pub x: Vec<f64>,
    pub f: f64,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
    pub n_fev: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Minimizer of the cubic interpolating `(x1, f1, g1)` and `(x2, f2, g2)`,
/// clamped to `[lo, hi]`.
fn cubic_minimizer(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, lo: f64, hi: f64) -> f64 {
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_square = d1 * d1 - g1 * g2;
    if d2_square >= 0.0 {
        let d2 = d2_square.sqrt();
        let t = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if t.is_finite() {
            return t.clamp(lo, hi);
        }
    }
    0.5 * (lo + hi)
}

struct Trial {
    t: f64,
    f: f64,
    g: Vec<f64>,
    gtd: f64,
}

struct LineSearch {
    best: Trial,
    evals: usize,
    wolfe: bool,
}

fn strong_wolfe<F>(
    obj: &mut F,
    x: &[f64],
    d: &[f64],
    f0: f64,
    gtd0: f64,
    t_init: f64,
    opts: &LbfgsOptions,
) -> Result<LineSearch>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let d_max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let resolution = 1e-12 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut eval = |t: f64| -> Result<Trial> {
        let (f, g) = obj(&axpy(x, t, d))?;
        let f = if f.is_finite() { f } else { f64::INFINITY };
        let gtd = dot(&g, d);
        Ok(Trial { t, f, g, gtd })
    };
    let armijo = |tr: &Trial| tr.f <= f0 + opts.c1 * tr.t * gtd0;
    let curvature = |tr: &Trial| tr.gtd.abs() <= -opts.c2 * gtd0;

    let mut prev = Trial { t: 0.0, f: f0, g: Vec::new(), gtd: gtd0 };
    let mut cur = eval(t_init)?;
    let mut evals = 1;
    // Bracketing phase.
    let (mut lo, mut hi) = loop {
        if !armijo(&cur) || (evals > 1 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Ok(LineSearch { best: cur, evals, wolfe: true });
        }
        if cur.gtd >= 0.0 {
            break (cur, prev);
        }
        if evals >= opts.max_linesearch {
            return Ok(LineSearch { best: cur, evals, wolfe: false });
        }
        let min_step = cur.t + 0.01 * (cur.t - prev.t);
        let max_step = 10.0 * cur.t;
        let t = cubic_minimizer(prev.t, prev.f, prev.gtd, cur.t, cur.f, cur.gtd, min_step, max_step);
        let next = eval(t)?;
        evals += 1;
        prev = std::mem::replace(&mut cur, next);
    };
    // `lo` satisfies Armijo with the lower value, `hi` bounds the interval.
    if lo.f > hi.f {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut insufficient_progress = false;
    while evals < opts.max_linesearch {
        if (hi.t - lo.t).abs() * d_max < resolution {
            break;
        }
        let (a, b) = (lo.t.min(hi.t), lo.t.max(hi.t));
        let mut t = cubic_minimizer(lo.t, lo.f, lo.gtd, hi.t, hi.f, hi.gtd, a, b);
        let eps = 0.1 * (b - a);
        if (b - t).min(t - a) < eps {
            if insufficient_progress || t >= b || t <= a {
                t = if (t - b).abs() < (t - a).abs() { b - eps } else { a + eps };
                insufficient_progress = false;
            } else {
                insufficient_progress = true;
            }
        } else {
            insufficient_progress = false;
        }
        let tr = eval(t)?;
        evals += 1;
        if !armijo(&tr) || tr.f >= lo.f {
            hi = tr;
        } else {
            if curvature(&tr) {
                return Ok(LineSearch { best: tr, evals, wolfe: true });
            }
            if tr.gtd * (hi.t - lo.t) >= 0.0 {
                hi = std::mem::replace(&mut lo, tr);
            } else {
                lo = tr;
            }
        }
    }
    Ok(LineSearch { best: lo, evals, wolfe: false })
}

/// Minimizes `obj` from `x0`. `monitor` is called on every accepted iterate
/// (including `x0`) and may return an error metric for the history.
pub fn minimize<F, M>(mut obj: F, x0: Vec<f64>, opts: &LbfgsOptions, mut monitor: M) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    M: FnMut(&[f64]) -> Option<f64>,
{
    opts.validate()?;
    let start = Instant::now();
    let mut x = x0;
    let (mut f, mut g) = obj(&x)?;
    if !f.is_finite() {
        return Err(Error::Degenerate(format!("objective is {f} at the starting point")));
    }
    let mut n_fev = 1;
    let mut history = vec![IterationRecord {
        iter: 0,
        j: f,
        grad_norm: norm(&g),
        rel_err: monitor(&x),
        n_fev,
        elapsed_s: start.elapsed().as_secs_f64(),
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut h_diag = 1.0;
    let mut stop = StopReason::MaxIterations;
    let mut iter = 0;

    while iter < opts.max_iter {
        if norm(&g) <= opts.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        d.iter_mut().for_each(|v| *v *= h_diag);
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut gtd = dot(&g, &d);
        if !(gtd < 0.0) {
            // Lost positive definiteness: restart from steepest descent.
            pairs.clear();
            h_diag = 1.0;
            d = g.iter().map(|v| -v).collect();
            gtd = dot(&g, &d);
            if !(gtd < 0.0) {
                stop = StopReason::Stalled;
                break;
            }
        }
        let t_init = if iter == 0 { 1.0 / norm(&g) } else { 1.0 };
        let ls = strong_wolfe(&mut obj, &x, &d, f, gtd, t_init, opts)?;
        n_fev += ls.evals;
        let improved = ls.best.f < f;
        if !improved {
            if iter == 0 {
                return Err(Error::DegenerateStart { trials: ls.evals });
            }
            stop = if ls.evals >= opts.max_linesearch {
                StopReason::LineSearchLimit
            } else {
                StopReason::Stalled
            };
            break;
        }
        let trial = ls.best;
        let s: Vec<f64> = d.iter().map(|v| trial.t * v).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ys = dot(&y, &s);
        if ys > 1e-10 * norm(&y) * norm(&s) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            h_diag = ys / dot(&y, &y);
            pairs.push_back((s, y, 1.0 / ys));
        }
        x = axpy(&x, trial.t, &d);
        f = trial.f;
        g = trial.g;
        iter += 1;
        history.push(IterationRecord {
            iter,
            j: f,
            grad_norm: norm(&g),
            rel_err: monitor(&x),
            n_fev,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        if !ls.wolfe {
            stop = if ls.evals >= opts.max_linesearch {
                StopReason::LineSearchLimit
            } else {
                StopReason::Stalled
            };
            break;
        }
    }
    Ok(LbfgsResult { x, f, history, stop, n_fev })
}
