//! Stationary kernels with an additive white-noise term.
//!
//! Inputs are one-dimensional; the scaled distance is `|xᵢ − xⱼ| / l`.
//! Hyperparameters live in log-space so every implied scale stays positive
//! under unconstrained optimisation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Kernel family. Every kernel is implicitly summed with `σ_w²·δᵢⱼ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelSpec {
    /// `σ²·exp(−d²/2)`
    #[serde(rename = "se")]
    SquaredExponential,
    /// `σ²·(1 + √3 r)·exp(−√3 r)`
    #[serde(rename = "matern32")]
    Matern32,
}

impl KernelSpec {
    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::SquaredExponential => "se",
            KernelSpec::Matern32 => "matern32",
        }
    }

    /// Stationary part as a function of the scaled distance.
    fn profile(self, r: f64) -> f64 {
        match self {
            KernelSpec::SquaredExponential => (-0.5 * r * r).exp(),
            KernelSpec::Matern32 => (1.0 + SQRT3 * r) * (-SQRT3 * r).exp(),
        }
    }

    /// Derivative of the stationary part with respect to `log l`, per unit
    /// signal variance.
    fn profile_dlog_l(self, r: f64) -> f64 {
        match self {
            KernelSpec::SquaredExponential => r * r * (-0.5 * r * r).exp(),
            KernelSpec::Matern32 => 3.0 * r * r * (-SQRT3 * r).exp(),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se" | "squared-exponential" => Ok(KernelSpec::SquaredExponential),
            "matern32" | "matern-3/2" => Ok(KernelSpec::Matern32),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub log_signal_sd: f64,
    pub log_lengthscale: f64,
    pub log_noise_sd: f64,
}

impl KernelParams {
    /// Builds from natural-scale values. A zero noise sd maps to `−∞`,
    /// which evaluates to an exactly noise-free kernel.
    pub fn new(signal_sd: f64, lengthscale: f64, noise_sd: f64) -> Self {
        KernelParams {
            log_signal_sd: signal_sd.ln(),
            log_lengthscale: lengthscale.ln(),
            log_noise_sd: noise_sd.ln(),
        }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        KernelParams {
            log_signal_sd: v[0],
            log_lengthscale: v[1],
            log_noise_sd: v[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.log_signal_sd, self.log_lengthscale, self.log_noise_sd]
    }

    pub fn signal_var(&self) -> f64 {
        (2.0 * self.log_signal_sd).exp()
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn noise_var(&self) -> f64 {
        (2.0 * self.log_noise_sd).exp()
    }
}

fn check_lengthscale(params: &KernelParams) -> Result<f64> {
    let l = params.lengthscale();
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!("lengthscale must be positive and finite, got {l}")));
    }
    Ok(l)
}

fn check_inputs(xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::invalid(format!("input {i} is not finite"))),
        None => Ok(()),
    }
}

/// Kernel value between two inputs. `same_index` switches on the
/// white-noise term; it reflects index identity, not coordinate equality.
pub fn kernel_eval(
    spec: KernelSpec,
    params: &KernelParams,
    xi: f64,
    xj: f64,
    same_index: bool,
) -> Result<f64> {
    check_inputs(&[xi, xj])?;
    let l = check_lengthscale(params)?;
    let r = (xi - xj).abs() / l;
    let noise = if same_index { params.noise_var() } else { 0.0 };
    Ok(params.signal_var() * spec.profile(r) + noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Add `σ_w²` on the diagonal; both input sets must be the same training set.
    TrainDiag,
    None,
}

/// Covariance between two input sets.
pub fn cov_matrix(
    spec: KernelSpec,
    params: &KernelParams,
    x1: &[f64],
    x2: &[f64],
    noise_mode: NoiseMode,
) -> Result<DMatrix<f64>> {
    check_inputs(x1)?;
    check_inputs(x2)?;
    let l = check_lengthscale(params)?;
    if noise_mode == NoiseMode::TrainDiag && x1 != x2 {
        return Err(Error::invalid(
            "train-diagonal noise requires identical input sets",
        ));
    }
    let s2 = params.signal_var();
    let mut k = DMatrix::from_fn(x1.len(), x2.len(), |i, j| {
        s2 * spec.profile((x1[i] - x2[j]).abs() / l)
    });
    if noise_mode == NoiseMode::TrainDiag {
        let w2 = params.noise_var();
        for i in 0..x1.len() {
            k[(i, i)] += w2;
        }
    }
    Ok(k)
}

/// Derivatives of the training covariance with respect to
/// `(log σ_signal, log l, log σ_w)`.
pub fn cov_matrix_grads(
    spec: KernelSpec,
    params: &KernelParams,
    x: &[f64],
) -> Result<[DMatrix<f64>; 3]> {
    check_inputs(x)?;
    let l = check_lengthscale(params)?;
    let n = x.len();
    let s2 = params.signal_var();
    let mut d_signal = DMatrix::zeros(n, n);
    let mut d_length = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let r = (x[i] - x[j]).abs() / l;
            let ds = 2.0 * s2 * spec.profile(r);
            let dl = s2 * spec.profile_dlog_l(r);
            d_signal[(i, j)] = ds;
            d_signal[(j, i)] = ds;
            d_length[(i, j)] = dl;
            d_length[(j, i)] = dl;
        }
    }
    let d_noise = DMatrix::from_diagonal_element(n, n, 2.0 * params.noise_var());
    Ok([d_signal, d_length, d_noise])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_eval_examples() {
        let se = KernelSpec::SquaredExponential;
        let v = kernel_eval(se, &KernelParams::new(1.0, 1.0, 0.5), 0.3, 0.3, true).unwrap();
        assert!((v - 1.25).abs() < 1e-15);
        let v = kernel_eval(se, &KernelParams::new(1.0, 1.0, 0.0), 0.0, 1.0, false).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-15);
        let v = kernel_eval(KernelSpec::Matern32, &KernelParams::new(2.0, 2.0, 0.0), 1.0, 3.0, false)
            .unwrap();
        assert!((v - 1.9336).abs() < 1e-3);
        assert!((v - 1.933_430_898_386_031).abs() < 1e-12);
    }

    #[test]
    fn noise_follows_index_not_coordinate() {
        let p = KernelParams::new(1.0, 1.0, 0.5);
        let k = cov_matrix(KernelSpec::SquaredExponential, &p, &[0.0, 0.0], &[0.0, 0.0], NoiseMode::TrainDiag)
            .unwrap();
        assert!((k[(0, 0)] - 1.25).abs() < 1e-15);
        assert!((k[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_eval_rejects_non_finite() {
        let p = KernelParams::new(1.0, 1.0, 0.1);
        assert!(kernel_eval(KernelSpec::Matern32, &p, f64::NAN, 0.0, false).is_err());
        assert!(kernel_eval(KernelSpec::Matern32, &p, 0.0, f64::INFINITY, false).is_err());
    }

    #[test]
    fn cov_matrix_examples() {
        let se = KernelSpec::SquaredExponential;
        let p = KernelParams::new(1.5, 0.7, 0.2);
        let k = cov_matrix(se, &p, &[0.4], &[0.4], NoiseMode::TrainDiag).unwrap();
        assert!((k[(0, 0)] - (2.25 + 0.04)).abs() < 1e-14);

        let p = KernelParams::new(1.0, 1.0, 0.0);
        let k = cov_matrix(se, &p, &[0.0, 1.0], &[0.0, 1.0], NoiseMode::TrainDiag).unwrap();
        let e = (-0.5f64).exp();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-15 && (k[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((k[(0, 1)] - e).abs() < 1e-15 && (k[(1, 0)] - e).abs() < 1e-15);

        let p = KernelParams::new(1.0, 1.0, 3.0);
        let (a, b) = ([0.0, 1.0], [0.5, 1.0, 7.0]);
        let k = cov_matrix(se, &p, &a, &b, NoiseMode::None).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let expected = (-0.5 * (a[i] - b[j]) * (a[i] - b[j])).exp();
                assert_eq!(k[(i, j)], expected);
            }
        }
        assert!(cov_matrix(se, &p, &[0.0], &[1.0], NoiseMode::TrainDiag).is_err());
    }

    #[test]
    fn noise_gradient_is_scaled_identity() {
        let p = KernelParams::new(0.8, 1.3, 0.3);
        let x = [0.0, 0.5, 2.0, -1.0];
        let g = cov_matrix_grads(KernelSpec::Matern32, &p, &x).unwrap();
        assert_eq!(g[2], DMatrix::from_diagonal_element(4, 4, 2.0 * p.noise_var()));
        assert!((p.noise_var() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn se_lengthscale_gradient_closed_form() {
        let p = KernelParams::new(1.2, 0.8, 0.1);
        let x = [0.0, 1.1];
        let g = cov_matrix_grads(KernelSpec::SquaredExponential, &p, &x).unwrap();
        let d: f64 = 1.1 / 0.8;
        let expected = 1.44 * (-0.5 * d * d).exp() * d * d;
        assert!((g[1][(0, 1)] - expected).abs() < 1e-12);
        // signal gradient is 2·(K − σ_w² I)
        let k = cov_matrix(KernelSpec::SquaredExponential, &p, &x, &x, NoiseMode::TrainDiag).unwrap();
        let no_noise = k - DMatrix::from_diagonal_element(2, 2, p.noise_var());
        assert!((&g[0] - no_noise * 2.0).amax() < 1e-14);
    }

    fn fd_check(spec: KernelSpec, base: [f64; 3], x: &[f64]) {
        let p = KernelParams::from_array(base);
        let grads = cov_matrix_grads(spec, &p, x).unwrap();
        let h = 1e-5;
        for (k, g) in grads.iter().enumerate() {
            let mut up = base;
            let mut down = base;
            up[k] += h;
            down[k] -= h;
            let kp = cov_matrix(spec, &KernelParams::from_array(up), x, x, NoiseMode::TrainDiag).unwrap();
            let km = cov_matrix(spec, &KernelParams::from_array(down), x, x, NoiseMode::TrainDiag).unwrap();
            let fd = (kp - km) / (2.0 * h);
            let scale = g.amax().max(1e-12);
            assert!((&fd - g).amax() / scale < 1e-5, "{spec:?} param {k}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = [-1.3, -0.2, 0.0, 0.7, 2.4];
        for spec in [KernelSpec::SquaredExponential, KernelSpec::Matern32] {
            fd_check(spec, [0.2, -0.3, -1.5], &x);
            fd_check(spec, [-0.7, 0.9, -3.0], &x);
        }
    }

    proptest! {
        #[test]
        fn gradients_fd_random(
            ls in -1.0f64..1.0, ll in -1.0f64..1.0, lw in -3.0f64..0.0,
            x in prop::collection::vec(-3.0f64..3.0, 2..8),
            matern in any::<bool>(),
        ) {
            let spec = if matern { KernelSpec::Matern32 } else { KernelSpec::SquaredExponential };
            fd_check(spec, [ls, ll, lw], &x);
        }

        #[test]
        fn covariance_symmetric_and_pd(
            ls in -1.0f64..1.0, ll in -1.0f64..1.0, lw in -3.0f64..0.0,
            x in prop::collection::vec(-3.0f64..3.0, 1..12),
            matern in any::<bool>(),
        ) {
            let spec = if matern { KernelSpec::Matern32 } else { KernelSpec::SquaredExponential };
            let p = KernelParams::from_array([ls, ll, lw]);
            let k = cov_matrix(spec, &p, &x, &x, NoiseMode::TrainDiag).unwrap();
            prop_assert_eq!(&k, &k.transpose());
            prop_assert!(k.clone().cholesky().is_some());
            for g in cov_matrix_grads(spec, &p, &x).unwrap() {
                prop_assert_eq!(&g, &g.transpose());
            }
        }

        #[test]
        fn peak_at_zero_and_scale_invariant(
            dist in 0.0f64..10.0, scale in 0.1f64..10.0, l in 0.1f64..5.0,
            matern in any::<bool>(),
        ) {
            let spec = if matern { KernelSpec::Matern32 } else { KernelSpec::SquaredExponential };
            let p = KernelParams::new(1.3, l, 0.0);
            let at0 = kernel_eval(spec, &p, 0.0, 0.0, false).unwrap();
            let at_d = kernel_eval(spec, &p, 0.0, dist, false).unwrap();
            prop_assert!(at0 >= at_d);
            let scaled = KernelParams::new(1.3, l * scale, 0.0);
            let at_sd = kernel_eval(spec, &scaled, 0.0, dist * scale, false).unwrap();
            prop_assert!((at_d - at_sd).abs() <= 1e-12 * at0);
        }
    }
}
