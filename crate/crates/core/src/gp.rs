//! Exact Gaussian process regression with a constant mean.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{cov_matrix, cov_matrix_grads, KernelParams, KernelSpec, NoiseMode};
use crate::optimize::{minimize_multistart, restart_points, Bounds, OptimizerConfig};

/// Box applied to every log-hyperparameter during fitting.
pub const LOG_PARAM_BOUNDS: (f64, f64) = (-15.0, 15.0);

/// Jitter levels, relative to the mean of the covariance diagonal, tried in
/// turn when the plain Cholesky factorisation fails.
const JITTER_LEVELS: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Cholesky factor of `k`, escalating diagonal jitter on failure. Returns the
/// factor and the absolute jitter that was added (zero if none).
pub fn factorize(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = k.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let n = k.nrows().max(1);
    let base = k.diagonal().sum() / n as f64;
    let mut tried = Vec::with_capacity(JITTER_LEVELS.len());
    for level in JITTER_LEVELS {
        let jitter = level * base;
        tried.push(jitter);
        if !jitter.is_finite() {
            break;
        }
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = kj.cholesky() {
            log::debug!("cholesky succeeded with jitter {jitter:e}");
            return Ok((chol, jitter));
        }
    }
    Err(Error::NotPositiveDefinite { jitters: tried })
}

/// Negative log marginal likelihood and its gradient with respect to
/// `(log σ_signal, log l, log σ_w, mean_const)`.
pub fn neg_log_marginal_likelihood(
    spec: KernelSpec,
    params: &KernelParams,
    mean_const: f64,
    x: &[f64],
    y: &[f64],
) -> Result<(f64, [f64; 4])> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!(
            "nll: need matching non-empty inputs ({} x, {} y)",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let k = cov_matrix(spec, params, x, x, NoiseMode::TrainDiag)?;
    let (chol, _) = factorize(&k)?;
    let resid = DVector::from_iterator(n, y.iter().map(|v| v - mean_const));
    let alpha = chol.solve(&resid);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let value = 0.5 * resid.dot(&alpha) + 0.5 * log_det + 0.5 * n as f64 * (2.0 * PI).ln();

    // ∂/∂θ = ½ tr((K⁻¹ − ααᵀ) ∂K/∂θ)
    let mut w = chol.inverse();
    w.ger(-1.0, &alpha, &alpha, 1.0);
    let grads = cov_matrix_grads(spec, params, x)?;
    let mut gradient = [0.0; 4];
    for (g, dk) in gradient.iter_mut().zip(grads.iter()) {
        *g = 0.5 * w.component_mul(dk).sum();
    }
    gradient[3] = -alpha.sum();
    Ok((value, gradient))
}

/// A fitted GP: hyperparameters, constant mean and the cached factorisation
/// of the training covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TrainedGpDoc", try_from = "TrainedGpDoc")]
pub struct TrainedGp {
    spec: KernelSpec,
    params: KernelParams,
    mean_const: f64,
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    /// Positions of the training points in the dataset they were drawn from.
    train_indices: Vec<usize>,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// JSON form of a [`TrainedGp`]; the factorisation is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedGpDoc {
    pub family: KernelSpec,
    pub log_signal_sd: f64,
    pub log_lengthscale: f64,
    pub log_noise_sd: f64,
    pub mean_const: f64,
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub train_indices: Vec<usize>,
}

impl From<TrainedGp> for TrainedGpDoc {
    fn from(gp: TrainedGp) -> Self {
        TrainedGpDoc {
            family: gp.spec,
            log_signal_sd: gp.params.log_signal_sd,
            log_lengthscale: gp.params.log_lengthscale,
            log_noise_sd: gp.params.log_noise_sd,
            mean_const: gp.mean_const,
            train_x: gp.train_x,
            train_y: gp.train_y,
            train_indices: gp.train_indices,
        }
    }
}

impl TryFrom<TrainedGpDoc> for TrainedGp {
    type Error = Error;

    fn try_from(doc: TrainedGpDoc) -> Result<Self> {
        if doc.train_indices.len() != doc.train_x.len() {
            return Err(Error::invalid("model: train_indices length mismatch"));
        }
        let params = KernelParams {
            log_signal_sd: doc.log_signal_sd,
            log_lengthscale: doc.log_lengthscale,
            log_noise_sd: doc.log_noise_sd,
        };
        let mut gp = TrainedGp::new(doc.family, params, doc.mean_const, doc.train_x, doc.train_y)?;
        gp.train_indices = doc.train_indices;
        Ok(gp)
    }
}

/// Posterior predictive moments at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// Variance of the latent function value.
    pub var_latent: Vec<f64>,
    /// Latent variance plus the white-noise variance.
    pub var_observed: Vec<f64>,
}

impl TrainedGp {
    /// Conditions a GP with fixed hyperparameters on `(x, y)`.
    pub fn new(
        spec: KernelSpec,
        params: KernelParams,
        mean_const: f64,
        train_x: Vec<f64>,
        train_y: Vec<f64>,
    ) -> Result<Self> {
        if train_x.is_empty() || train_x.len() != train_y.len() {
            return Err(Error::invalid(format!(
                "gp: need matching non-empty training data ({} x, {} y)",
                train_x.len(),
                train_y.len()
            )));
        }
        if !mean_const.is_finite() || train_y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gp: targets and mean must be finite"));
        }
        let k = cov_matrix(spec, &params, &train_x, &train_x, NoiseMode::TrainDiag)?;
        let (chol, jitter) = factorize(&k)?;
        let resid = DVector::from_iterator(train_y.len(), train_y.iter().map(|v| v - mean_const));
        let alpha = chol.solve(&resid);
        let train_indices = (0..train_x.len()).collect();
        Ok(TrainedGp {
            spec,
            params,
            mean_const,
            train_x,
            train_y,
            train_indices,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn mean_const(&self) -> f64 {
        self.mean_const
    }

    pub fn train_x(&self) -> &[f64] {
        &self.train_x
    }

    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train_indices
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular Cholesky factor of the (jittered) training covariance.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub(crate) fn with_indices(mut self, indices: Vec<usize>) -> Self {
        debug_assert_eq!(indices.len(), self.train_x.len());
        self.train_indices = indices;
        self
    }

    /// NLL of the stored training data at the stored hyperparameters.
    pub fn nll(&self) -> Result<f64> {
        neg_log_marginal_likelihood(self.spec, &self.params, self.mean_const, &self.train_x, &self.train_y)
            .map(|(v, _)| v)
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction> {
        let ks = cov_matrix(self.spec, &self.params, &self.train_x, x_star, NoiseMode::None)?;
        let mean: Vec<f64> = ks
            .tr_mul(&self.alpha)
            .iter()
            .map(|v| v + self.mean_const)
            .collect();
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .ok_or_else(|| Error::NotPositiveDefinite { jitters: vec![self.jitter] })?;
        let s2 = self.params.signal_var();
        let w2 = self.params.noise_var();
        let var_latent: Vec<f64> = v
            .column_iter()
            .map(|col| (s2 - col.norm_squared()).max(0.0))
            .collect();
        let var_observed = var_latent.iter().map(|v| v + w2).collect();
        Ok(Prediction {
            mean,
            var_latent,
            var_observed,
        })
    }
}

fn mean_and_std(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn median_pairwise_distance(x: &[f64]) -> f64 {
    let mut dists: Vec<f64> = x
        .iter()
        .enumerate()
        .flat_map(|(i, a)| x[i + 1..].iter().map(move |b| (a - b).abs()))
        .collect();
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

/// Data-driven starting point: signal sd = std(y), lengthscale = median
/// pairwise distance, noise sd = std(y)/10.
pub fn initial_params(x: &[f64], y: &[f64]) -> KernelParams {
    let (_, sd) = mean_and_std(y);
    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    KernelParams::new(sd, median_pairwise_distance(x), 0.1 * sd)
}

/// Fits hyperparameters on the whole dataset.
pub fn fit(data: &Dataset, spec: KernelSpec, cfg: &OptimizerConfig) -> Result<TrainedGp> {
    fit_xy(&data.x, &data.y, spec, cfg, None)
}

/// Fits hyperparameters by multi-restart maximum likelihood. The constant
/// mean is the sample mean of `y`. With `warm_start` the restarts centre on
/// those parameters instead of the data-driven initial guess.
pub fn fit_xy(
    x: &[f64],
    y: &[f64],
    spec: KernelSpec,
    cfg: &OptimizerConfig,
    warm_start: Option<KernelParams>,
) -> Result<TrainedGp> {
    if x.len() != y.len() {
        return Err(Error::invalid("fit: x and y lengths differ"));
    }
    if x.len() < 3 {
        return Err(Error::invalid(format!(
            "fit: need at least 3 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("fit: data must be finite"));
    }
    cfg.validate()?;
    let (mean_const, _) = mean_and_std(y);
    let bounds = Bounds::uniform(3, LOG_PARAM_BOUNDS.0, LOG_PARAM_BOUNDS.1);
    let mut base = warm_start.unwrap_or_else(|| initial_params(x, y)).to_array();
    bounds.project(&mut base);
    let starts = restart_points(&base, cfg.n_restarts, 1.0, cfg.seed, &bounds);

    let objective = |theta: &[f64]| {
        let params = KernelParams::from_array([theta[0], theta[1], theta[2]]);
        neg_log_marginal_likelihood(spec, &params, mean_const, x, y)
            .ok()
            .map(|(v, g)| (v, g[..3].to_vec()))
    };
    let best = minimize_multistart(objective, &starts, &bounds, cfg)?;
    let params = KernelParams::from_array([best.x[0], best.x[1], best.x[2]]);
    TrainedGp::new(spec, params, mean_const, x.to_vec(), y.to_vec())
}
