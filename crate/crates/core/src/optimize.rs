//! Box-constrained quasi-Newton minimisation.
//!
//! A dense BFGS inverse-Hessian update with Armijo backtracking along the
//! projected path `P(x + t·d)`. Variables sitting on a bound with the
//! gradient pushing outward are frozen for the step. Problems here are tiny
//! (three hyperparameters), so no limited-memory machinery is needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub n_restarts: usize,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n_restarts: 3,
            max_evals: 200,
            grad_tol: 1e-6,
            step_tol: 1e-9,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 || self.max_evals == 0 {
            return Err(Error::invalid("optimizer: n_restarts and max_evals must be >= 1"));
        }
        if !(self.grad_tol > 0.0 && self.step_tol > 0.0) {
            return Err(Error::invalid("optimizer: tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Bounds {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
        }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::uniform(dim, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    GradientTolerance,
    StepTolerance,
    MaxEvaluations,
    /// No step satisfied sufficient decrease.
    LineSearchFailed,
    /// The objective went non-finite and the line search could not recover.
    Abandoned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub status: Status,
    pub n_evals: usize,
    pub n_iters: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn evaluate<F>(objective: &mut F, x: &[f64]) -> Option<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    objective(x).filter(|(f, g)| f.is_finite() && g.iter().all(|v| v.is_finite()))
}

/// Minimises `objective` from `x0` inside `bounds`.
///
/// The objective returns `(value, gradient)`, or `None` when it cannot be
/// evaluated (treated like a non-finite value). The returned point never has
/// a larger objective than the projected start.
pub fn minimize<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &Bounds,
    cfg: &OptimizerConfig,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let n = x0.len();
    if bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(Error::invalid("minimize: bounds dimension mismatch"));
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut f, mut g) = evaluate(&mut objective, &x)
        .ok_or_else(|| Error::invalid("minimize: objective is not finite at the start point"))?;
    let mut n_evals = 1;
    let mut n_iters = 0;
    let mut h = identity(n);
    let mut h_is_identity = true;

    let status = loop {
        let fixed: Vec<bool> = (0..n)
            .map(|i| {
                (x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0)
            })
            .collect();
        let projected_grad: Vec<f64> = (0..n)
            .map(|i| if fixed[i] { 0.0 } else { g[i] })
            .collect();
        if norm(&projected_grad) < cfg.grad_tol {
            break Status::GradientTolerance;
        }
        if n_evals >= cfg.max_evals {
            break Status::MaxEvaluations;
        }

        let mut d = direction(&h, &projected_grad, &fixed);
        if dot(&d, &projected_grad) >= 0.0 {
            h = identity(n);
            h_is_identity = true;
            d = projected_grad.iter().map(|v| -v).collect();
        }
        if h_is_identity {
            let largest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if largest > 1.0 {
                d.iter_mut().for_each(|v| *v /= largest);
            }
        }

        let mut t = 1.0;
        let mut saw_failure = false;
        let accepted = loop {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            bounds.project(&mut xt);
            let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm(&step) < cfg.step_tol {
                break None;
            }
            n_evals += 1;
            match evaluate(&mut objective, &xt) {
                Some((ft, gt)) if ft <= f + 1e-4 * dot(&g, &step) => break Some((xt, ft, gt, step)),
                Some(_) => {}
                None => saw_failure = true,
            }
            if n_evals >= cfg.max_evals {
                break None;
            }
            t *= 0.5;
        };

        let Some((xt, ft, gt, s)) = accepted else {
            break if saw_failure {
                Status::Abandoned
            } else if n_evals >= cfg.max_evals {
                Status::MaxEvaluations
            } else if t < 1.0 {
                Status::LineSearchFailed
            } else {
                Status::StepTolerance
            };
        };
        n_iters += 1;

        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if h_is_identity {
                let scale = sy / dot(&y, &y);
                h.iter_mut().flatten().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, sy);
            h_is_identity = false;
        }

        let step_len = norm(&s);
        x = xt;
        f = ft;
        g = gt;
        if step_len < cfg.step_tol {
            break Status::StepTolerance;
        }
    };

    Ok(Minimum {
        x,
        f,
        status,
        n_evals,
        n_iters,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn direction(h: &[Vec<f64>], g: &[f64], fixed: &[bool]) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            if fixed[i] {
                0.0
            } else {
                -(0..g.len()).filter(|&j| !fixed[j]).map(|j| h[i][j] * g[j]).sum::<f64>()
            }
        })
        .collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Start points for a multi-restart run: `x0` itself followed by
/// `n_restarts − 1` uniform perturbations within `±radius` per coordinate,
/// drawn from a ChaCha8 stream seeded with `seed`.
pub fn restart_points(
    x0: &[f64],
    n_restarts: usize,
    radius: f64,
    seed: u64,
    bounds: &Bounds,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![x0.to_vec()];
    for _ in 1..n_restarts {
        let mut p: Vec<f64> = x0
            .iter()
            .map(|v| v + rng.random_range(-radius..=radius))
            .collect();
        bounds.project(&mut p);
        starts.push(p);
    }
    starts
}

/// Runs [`minimize`] from every start and keeps the lowest objective, ties
/// going to the earliest start. Starts where the objective cannot be
/// evaluated are skipped; if every start fails the whole call fails.
pub fn minimize_multistart<F>(
    mut objective: F,
    starts: &[Vec<f64>],
    bounds: &Bounds,
    cfg: &OptimizerConfig,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut best: Option<Minimum> = None;
    for (k, start) in starts.iter().enumerate() {
        match minimize(&mut objective, start, bounds, cfg) {
            Ok(m) => {
                log::trace!("restart {k}: f = {} ({:?}, {} evals)", m.f, m.status, m.n_evals);
                if best.as_ref().is_none_or(|b| m.f < b.f) {
                    best = Some(m);
                }
            }
            Err(e) => log::debug!("restart {k} skipped: {e}"),
        }
    }
    best.ok_or(Error::OptimizationFailed {
        restarts: starts.len(),
    })
}
