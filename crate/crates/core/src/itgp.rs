//! Iterative trimming GP.
//!
//! The fit runs in three stages:
//!
//! 1. **Shrinking**: the kept fraction `α` falls linearly from 1 to `α₁`
//!    over the first `n_shrink` iterations.
//! 2. **Concentration**: refit on the `⌈α·n⌉` points with the smallest
//!    scaled residuals, always re-selected from the full sample, until the
//!    selected set repeats or `n_maxiter` is reached.
//! 3. **Reweighting** (optional, `α₂ > 0`): refit once on every point whose
//!    scaled residual is at most `η₂·√c₁`.
//!
//! The returned consistency factor `c` inflates the predictive variance of
//! the trimmed fit; the stored model is never rescaled.

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::gp::{fit_xy, Prediction, TrainedGp};
use crate::kernels::KernelSpec;
use crate::optimize::OptimizerConfig;
use crate::stats::{chi2_quantile, consistency_factor, lowest_fraction_indices, ConsistencyFactor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItgpConfig {
    /// Final kept fraction, in `(0, 1]`.
    pub alpha1: f64,
    /// Reweighting coverage in `[0, 1)`; zero disables reweighting.
    pub alpha2: f64,
    pub n_shrink: usize,
    pub n_maxiter: usize,
    pub optimizer: OptimizerConfig,
    pub spec: KernelSpec,
}

impl Default for ItgpConfig {
    fn default() -> Self {
        ItgpConfig {
            alpha1: 0.5,
            alpha2: 0.95,
            n_shrink: 5,
            n_maxiter: 10,
            optimizer: OptimizerConfig::default(),
            spec: KernelSpec::SquaredExponential,
        }
    }
}

impl ItgpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha1 <= 1.0) {
            return Err(Error::invalid(format!("itgp: alpha1 must lie in (0, 1], got {}", self.alpha1)));
        }
        if !(0.0..1.0).contains(&self.alpha2) {
            return Err(Error::invalid(format!("itgp: alpha2 must lie in [0, 1), got {}", self.alpha2)));
        }
        if self.n_maxiter == 0 {
            return Err(Error::invalid("itgp: n_maxiter must be >= 1"));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItgpResult {
    pub gp: TrainedGp,
    /// Consistency factor: `c₂` when reweighted, `c₁` otherwise.
    pub c: f64,
    /// Final selected index set, ascending.
    pub inliers: Vec<usize>,
    /// `|y − μ|/σ` of every point under `gp`, σ including observation noise.
    pub scaled_residuals: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    pub reweighted: bool,
    /// Reweighting was requested but kept fewer than 3 points, so the
    /// concentration result was returned instead.
    #[serde(default)]
    pub reweight_skipped: bool,
}

impl ItgpResult {
    /// Observed-scale predictive sd inflated by `√c`.
    pub fn scaled_sd(&self, prediction: &Prediction) -> Vec<f64> {
        prediction
            .var_observed
            .iter()
            .map(|v| (v * self.c).sqrt())
            .collect()
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction> {
        self.gp.predict(x_star)
    }
}

/// Outcome of the shrinking/concentration loop, before any reweighting.
#[derive(Debug, Clone)]
pub struct Concentration {
    pub gp: TrainedGp,
    pub c1: ConsistencyFactor,
    pub inliers: Vec<usize>,
    pub scaled_residuals: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
}

impl Concentration {
    pub fn into_result(self) -> ItgpResult {
        ItgpResult {
            gp: self.gp,
            c: self.c1.c,
            inliers: self.inliers,
            scaled_residuals: self.scaled_residuals,
            n_iterations: self.n_iterations,
            converged: self.converged,
            reweighted: false,
            reweight_skipped: false,
        }
    }
}

/// `α = α₁ + (1 − α₁)·max(1 − j/n_shrink, 0)`; `n_shrink = 0` means no shrinking.
pub fn shrink_alpha(j: usize, alpha1: f64, n_shrink: usize) -> f64 {
    let ramp = if n_shrink == 0 {
        0.0
    } else {
        (1.0 - j as f64 / n_shrink as f64).max(0.0)
    };
    alpha1 + (1.0 - alpha1) * ramp
}

/// `dᵢ = |yᵢ − μᵢ|/σᵢ` over every point of `data`, with σ the observed-scale sd.
pub fn scaled_residuals(gp: &TrainedGp, data: &Dataset) -> Result<Vec<f64>> {
    let pred = gp.predict(&data.x)?;
    data.y
        .iter()
        .zip(pred.mean.iter().zip(&pred.var_observed))
        .enumerate()
        .map(|(i, (y, (mu, var)))| {
            let sd = var.sqrt();
            if sd > 0.0 {
                Ok((y - mu).abs() / sd)
            } else {
                Err(Error::ZeroScale(i))
            }
        })
        .collect()
}

fn fit_on(
    data: &Dataset,
    indices: &[usize],
    cfg: &ItgpConfig,
    warm: Option<&TrainedGp>,
) -> Result<TrainedGp> {
    let sub = data.subset(indices);
    let gp = fit_xy(&sub.x, &sub.y, cfg.spec, &cfg.optimizer, warm.map(|g| *g.params()))?;
    Ok(gp.with_indices(indices.to_vec()))
}

fn check_input(data: &Dataset, cfg: &ItgpConfig) -> Result<()> {
    cfg.validate()?;
    data.validate()?;
    if data.len() < 10 {
        return Err(Error::invalid(format!("itgp: need at least 10 points, got {}", data.len())));
    }
    Ok(())
}

/// Shrinking and concentration.
///
/// Iteration 1 trains on the full sample; iteration `j > 1` trains on the
/// set selected at `j − 1`, warm-started from the previous optimum. A set
/// identical to the current training set is not refitted.
pub fn concentrate(data: &Dataset, cfg: &ItgpConfig) -> Result<Concentration> {
    check_input(data, cfg)?;
    let n = data.len();
    let c1 = consistency_factor(cfg.alpha1)?;
    let wrap = |iteration: usize| move |e: Error| Error::Iteration { iteration, source: Box::new(e) };

    let all: Vec<usize> = (0..n).collect();
    let mut gp = fit_on(data, &all, cfg, None).map_err(wrap(1))?;
    let mut selected: Option<Vec<usize>> = None;
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for j in 1..=cfg.n_maxiter {
        iterations = j;
        if let Some(prev) = &selected {
            if prev.as_slice() != gp.train_indices() {
                gp = fit_on(data, prev, cfg, Some(&gp)).map_err(wrap(j))?;
            }
        }
        residuals = scaled_residuals(&gp, data).map_err(wrap(j))?;
        let alpha = shrink_alpha(j, cfg.alpha1, cfg.n_shrink);
        let next = lowest_fraction_indices(&residuals, alpha).map_err(wrap(j))?;
        log::debug!("itgp iteration {j}: alpha = {alpha:.3}, kept {}", next.len());
        if selected.as_ref() == Some(&next) {
            converged = true;
            break;
        }
        selected = Some(next);
    }

    Ok(Concentration {
        gp,
        c1,
        inliers: selected.unwrap_or(all),
        scaled_residuals: residuals,
        n_iterations: iterations,
        converged,
    })
}

/// One-step reweighting of a concentration result: refit on
/// `{i : dᵢ ≤ η₂·√c₁}` using the final concentration residuals. Falls back
/// to the concentration result if fewer than 3 points pass.
pub fn reweight(data: &Dataset, conc: Concentration, cfg: &ItgpConfig) -> Result<ItgpResult> {
    cfg.validate()?;
    if cfg.alpha2 == 0.0 {
        return Ok(conc.into_result());
    }
    let c2 = consistency_factor(cfg.alpha2)?;
    let eta2 = chi2_quantile(cfg.alpha2, 1)?.sqrt();
    let threshold = eta2 * conc.c1.c.sqrt();
    let kept: Vec<usize> = (0..data.len())
        .filter(|&i| conc.scaled_residuals[i] <= threshold)
        .collect();
    if kept.len() < 3 {
        log::warn!(
            "reweighting kept only {} points (threshold {threshold:.3}); returning the concentration fit",
            kept.len()
        );
        let mut result = conc.into_result();
        result.reweight_skipped = true;
        return Ok(result);
    }
    let iteration = conc.n_iterations + 1;
    let wrap = |e: Error| Error::Iteration { iteration, source: Box::new(e) };
    let gp = fit_on(data, &kept, cfg, Some(&conc.gp)).map_err(wrap)?;
    let residuals = scaled_residuals(&gp, data).map_err(wrap)?;
    Ok(ItgpResult {
        gp,
        c: c2.c,
        inliers: kept,
        scaled_residuals: residuals,
        n_iterations: conc.n_iterations,
        converged: conc.converged,
        reweighted: true,
        reweight_skipped: false,
    })
}

/// Full iterative trimming fit.
pub fn itgp_fit(data: &Dataset, cfg: &ItgpConfig) -> Result<ItgpResult> {
    let conc = concentrate(data, cfg)?;
    reweight(data, conc, cfg)
}

/// Indices whose normalised residual `dᵢ/√c` exceeds `threshold`.
pub fn detect_outliers(result: &ItgpResult, data: &Dataset, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {threshold}")));
    }
    if result.scaled_residuals.len() != data.len() {
        return Err(Error::invalid(format!(
            "detect_outliers: result covers {} points, data has {}",
            result.scaled_residuals.len(),
            data.len()
        )));
    }
    let scale = result.c.sqrt();
    Ok(result
        .scaled_residuals
        .iter()
        .enumerate()
        .filter(|(_, d)| **d / scale > threshold)
        .map(|(i, _)| i)
        .collect())
}
