//! χ² distribution functions for one and three degrees of freedom, the
//! consistency factor of a trimmed Gaussian sample, residual selection and
//! test-set error metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CDF of the χ² distribution, restricted to `dof ∈ {1, 3}`.
///
/// Both cases reduce to the error function:
/// `F₁(x) = erf(√(x/2))` and `F₃(x) = F₁(x) − √(2x/π)·e^(−x/2)`.
pub fn chi2_cdf(x: f64, dof: u32) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("chi2_cdf: x must be >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return match dof {
            1 | 3 => Ok(1.0),
            _ => Err(unsupported_dof(dof)),
        };
    }
    let f1 = libm::erf((0.5 * x).sqrt());
    match dof {
        1 => Ok(f1),
        3 => Ok((f1 - (2.0 * x / PI).sqrt() * (-0.5 * x).exp()).max(0.0)),
        _ => Err(unsupported_dof(dof)),
    }
}

fn unsupported_dof(dof: u32) -> Error {
    Error::invalid(format!("chi2: only dof 1 and 3 are supported, got {dof}"))
}

fn chi2_1_pdf(x: f64) -> f64 {
    (-0.5 * x).exp() / (2.0 * PI * x).sqrt()
}

/// Quantile of the χ² distribution with one degree of freedom.
///
/// Brackets the root by doubling, then runs Newton steps safeguarded by
/// bisection.
pub fn chi2_quantile(p: f64, dof: u32) -> Result<f64> {
    if dof != 1 {
        return Err(unsupported_dof(dof));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "chi2_quantile: p must lie in [0, 1), got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }

    let cdf = |x: f64| libm::erf((0.5 * x).sqrt());
    let mut lo = 0.0;
    let mut hi = 1.0;
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            // p is within rounding of 1; the CDF has saturated.
            return Ok(hi);
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = cdf(x) - p;
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / chi2_1_pdf(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi || (x - lo).min(hi - x) == 0.0 {
            break;
        }
        if g.abs() < 1e-16 {
            break;
        }
    }
    Ok(x)
}

/// Variance correction for a Gaussian sample trimmed to its `alpha` central
/// fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyFactor {
    pub alpha: f64,
    /// The `alpha`-quantile of χ²₁.
    pub eta_sq: f64,
    pub c: f64,
}

/// `c = alpha / F₃(F₁⁻¹(alpha))`; `alpha = 1` returns exactly `c = 1`.
pub fn consistency_factor(alpha: f64) -> Result<ConsistencyFactor> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "consistency_factor: alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(ConsistencyFactor {
            alpha,
            eta_sq: f64::INFINITY,
            c: 1.0,
        });
    }
    let eta_sq = chi2_quantile(alpha, 1)?;
    let c = alpha / chi2_cdf(eta_sq, 3)?;
    Ok(ConsistencyFactor { alpha, eta_sq, c })
}

/// Size of the kept subset, `⌈alpha·n⌉`, clamped to `[1, n]`.
///
/// Products such as `0.9 * 100` land a few ulps above the integer, so the
/// ceiling is taken after a relative nudge downwards.
pub fn trimmed_count(n: usize, alpha: f64) -> usize {
    let raw = alpha * n as f64;
    let h = (raw - raw * 1e-12).ceil() as usize;
    h.clamp(1, n.max(1))
}

/// Indices of the `⌈alpha·n⌉` smallest entries of `d`, in ascending index
/// order. Ties are broken by the lower index.
pub fn lowest_fraction_indices(d: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if d.is_empty() {
        return Err(Error::invalid("lowest_fraction_indices: empty residuals"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "lowest_fraction_indices: alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "lowest_fraction_indices: residual {i} is not finite"
        )));
    }
    let h = trimmed_count(d.len(), alpha);
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let mut kept = order[..h].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Test-set error summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub n_test: usize,
}

pub fn compute_metrics(predicted: &[f64], truth: &[f64]) -> Result<ErrorMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "compute_metrics: length mismatch ({} predicted, {} truth)",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("compute_metrics: no test points"));
    }
    let m = predicted.len() as f64;
    let (sq, abs) = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| t - p)
        .fold((0.0, 0.0), |(sq, abs), delta| {
            (sq + delta * delta, abs + delta.abs())
        });
    Ok(ErrorMetrics {
        rmse: (sq / m).sqrt(),
        mae: abs / m,
        n_test: predicted.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Oracle: composite Simpson integration of the χ² densities under the
    // substitution x = u², which removes the singularity at zero.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn oracle_cdf1(x: f64) -> f64 {
        simpson(|u| 2.0 * (-0.5 * u * u).exp() / (2.0 * PI).sqrt(), 0.0, x.sqrt(), 20_000)
    }

    fn oracle_cdf3(x: f64) -> f64 {
        simpson(|u| 2.0 * u * u * (-0.5 * u * u).exp() / (2.0 * PI).sqrt(), 0.0, x.sqrt(), 20_000)
    }

    #[test]
    fn cdf_matches_quadrature() {
        for &x in &[0.01, 0.4549, 1.0, 2.5, 3.8415, 7.0, 15.0] {
            assert!((chi2_cdf(x, 1).unwrap() - oracle_cdf1(x)).abs() < 1e-10, "dof 1 at {x}");
            assert!((chi2_cdf(x, 3).unwrap() - oracle_cdf3(x)).abs() < 1e-10, "dof 3 at {x}");
        }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(chi2_cdf(0.0, 1).unwrap(), 0.0);
        assert!((chi2_cdf(3.8415, 1).unwrap() - 0.95).abs() < 1e-4);
        assert!((chi2_cdf(0.4549, 3).unwrap() - 0.0710).abs() < 1e-3);
    }

    #[test]
    fn cdf_rejects_bad_arguments() {
        assert!(chi2_cdf(-1.0, 1).is_err());
        assert!(chi2_cdf(f64::NAN, 1).is_err());
        assert!(chi2_cdf(1.0, 2).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(chi2_quantile(0.0, 1).unwrap(), 0.0);
        assert!((chi2_quantile(0.5, 1).unwrap() - 0.4549).abs() < 1e-3);
        assert!((chi2_quantile(0.95, 1).unwrap() - 3.8415).abs() < 1e-3);
        // Root of the quadrature CDF, frozen.
        assert!((chi2_quantile(0.5, 1).unwrap() - 0.454_936_423_119_572_6).abs() < 1e-9);
        assert!((chi2_quantile(0.95, 1).unwrap() - 3.841_458_820_694_119_6).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_bad_arguments() {
        assert!(chi2_quantile(1.0, 1).is_err());
        assert!(chi2_quantile(-0.1, 1).is_err());
        assert!(chi2_quantile(0.5, 3).is_err());
    }

    #[test]
    fn quantile_round_trip_grid() {
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let q = chi2_quantile(p, 1).unwrap();
            assert!((chi2_cdf(q, 1).unwrap() - p).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn consistency_factor_examples() {
        assert_eq!(consistency_factor(1.0).unwrap().c, 1.0);
        let half = consistency_factor(0.5).unwrap();
        assert!((half.c - 7.04).abs() < 0.05);
        assert!((half.c - 7.010_074_539_703_24).abs() < 1e-6 * 7.01);
        let c95 = consistency_factor(0.95).unwrap();
        assert!((c95.c - 1.318).abs() < 0.01);
        assert!((c95.c - 1.317_798_045_738_825).abs() < 1e-6 * 1.318);
        assert_eq!(c95.c, 0.95 / chi2_cdf(c95.eta_sq, 3).unwrap());
    }

    #[test]
    fn consistency_factor_rejects_bad_alpha() {
        assert!(consistency_factor(0.0).is_err());
        assert!(consistency_factor(1.01).is_err());
        assert!(consistency_factor(f64::NAN).is_err());
    }

    #[test]
    fn lowest_fraction_examples() {
        assert_eq!(lowest_fraction_indices(&[3.0, 1.0, 2.0], 1.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(lowest_fraction_indices(&[3.0, 1.0, 2.0], 0.5).unwrap(), vec![1, 2]);
        assert_eq!(lowest_fraction_indices(&[5.0; 4], 0.5).unwrap(), vec![0, 1]);
        assert!(lowest_fraction_indices(&[1.0, f64::NAN], 0.5).is_err());
        assert!(lowest_fraction_indices(&[], 0.5).is_err());
    }

    #[test]
    fn trimmed_count_ignores_rounding_noise() {
        assert_eq!(trimmed_count(100, 0.9), 90);
        assert_eq!(trimmed_count(100, 0.5 + 0.5 * (1.0 - 1.0 / 5.0)), 90);
        assert_eq!(trimmed_count(100, 0.7), 70);
        assert_eq!(trimmed_count(3, 0.5), 2);
        assert_eq!(trimmed_count(7, 1e-6), 1);
    }

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.rmse, m.mae), (0.0, 0.0));
        let m = compute_metrics(&[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!((m.rmse, m.mae), (1.0, 1.0));
        let m = compute_metrics(&[0.0; 4], &[3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((m.rmse, m.mae, m.n_test), (1.5, 0.75, 4));
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn cdf_ordering_and_monotonicity(x in 0.0f64..60.0, dx in 0.0f64..5.0) {
            let a1 = chi2_cdf(x, 1).unwrap();
            let a3 = chi2_cdf(x, 3).unwrap();
            prop_assert!(a1 >= a3);
            prop_assert!(chi2_cdf(x + dx, 1).unwrap() >= a1);
            prop_assert!(chi2_cdf(x + dx, 3).unwrap() >= a3);
        }

        #[test]
        fn consistency_factor_decreasing(a in 0.01f64..0.99, gap in 0.001f64..0.5) {
            let b = (a + gap).min(1.0);
            prop_assert!(consistency_factor(a).unwrap().c > consistency_factor(b).unwrap().c);
        }

        #[test]
        fn selection_size_and_separation(
            d in prop::collection::vec(0.0f64..10.0, 1..60),
            alpha in 0.01f64..=1.0,
        ) {
            let kept = lowest_fraction_indices(&d, alpha).unwrap();
            prop_assert_eq!(kept.len(), trimmed_count(d.len(), alpha));
            prop_assert_eq!(kept.len(), ((alpha * d.len() as f64) * (1.0 - 1e-12)).ceil().max(1.0) as usize);
            let max_in = kept.iter().map(|&i| d[i]).fold(f64::MIN, f64::max);
            for i in (0..d.len()).filter(|i| !kept.contains(i)) {
                prop_assert!(d[i] >= max_in);
            }
        }

        #[test]
        fn mae_never_exceeds_rmse(delta in prop::collection::vec(-100.0f64..100.0, 1..50)) {
            let zeros = vec![0.0; delta.len()];
            let m = compute_metrics(&zeros, &delta).unwrap();
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
        }
    }
}
