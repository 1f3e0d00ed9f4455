//! Seeded synthetic datasets and their CSV form.
//!
//! Every generator draws from a `ChaCha8Rng` seeded with `seed_from_u64`,
//! which is portable across platforms. Replicate `r` of a benchmark with
//! base seed `s` uses seed `s + r`. Draw order within a dataset is fixed:
//! all inputs first, then the outlier index sample, then one noise draw
//! (plus one offset draw for cluster outliers) per point in index order.

use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Ground-truth contamination flags, known only for synthetic data.
    pub is_outlier: Option<Vec<bool>>,
    /// Noise-free function values, known only for synthetic data.
    pub f_true: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = Dataset {
            x,
            y,
            is_outlier: None,
            f_true: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.y.len() != n
            || self.is_outlier.as_ref().is_some_and(|v| v.len() != n)
            || self.f_true.as_ref().is_some_and(|v| v.len() != n)
        {
            return Err(Error::invalid("dataset: column lengths differ"));
        }
        let non_finite = self
            .x
            .iter()
            .chain(&self.y)
            .chain(self.f_true.iter().flatten())
            .any(|v| !v.is_finite());
        if non_finite {
            return Err(Error::invalid("dataset: values must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let pick_f = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset {
            x: pick_f(&self.x),
            y: pick_f(&self.y),
            is_outlier: self
                .is_outlier
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            f_true: self.f_true.as_deref().map(pick_f),
        }
    }

    /// Indices of ground-truth inliers, if flags are known.
    pub fn inlier_indices(&self) -> Option<Vec<usize>> {
        self.is_outlier
            .as_ref()
            .map(|flags| (0..flags.len()).filter(|&i| !flags[i]).collect())
    }

    pub fn outlier_indices(&self) -> Option<Vec<usize>> {
        self.is_outlier
            .as_ref()
            .map(|flags| (0..flags.len()).filter(|&i| flags[i]).collect())
    }
}

/// `f(x) = 0.3 + 0.4x + 0.5·sin(2.7x) + 1.1/(1 + x²)`
pub fn neal_true_function(x: f64) -> f64 {
    0.3 + 0.4 * x + 0.5 * (2.7 * x).sin() + 1.1 / (1.0 + x * x)
}

/// Contamination settings for the Neal benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NealCase {
    /// Outlier fraction.
    pub pi_o: f64,
    /// Outlier bias.
    pub b_o: f64,
    /// Outlier noise sd.
    pub sigma_o: f64,
    /// Inlier noise sd.
    pub sigma_r: f64,
    pub n_train: usize,
    pub seed: u64,
}

/// Bias used for the skewed preset unless overridden.
pub const DEFAULT_SKEWED_BIAS: f64 = 1.0;

impl NealCase {
    pub fn fiducial(seed: u64) -> Self {
        NealCase {
            pi_o: 0.15,
            b_o: 0.0,
            sigma_o: 1.0,
            sigma_r: 0.1,
            n_train: 100,
            seed,
        }
    }

    pub fn abundant(seed: u64) -> Self {
        NealCase {
            pi_o: 0.45,
            ..Self::fiducial(seed)
        }
    }

    pub fn skewed(seed: u64, b_o: f64) -> Self {
        NealCase {
            b_o,
            ..Self::fiducial(seed)
        }
    }

    pub fn extreme(seed: u64) -> Self {
        NealCase {
            sigma_o: 5.0,
            ..Self::fiducial(seed)
        }
    }

    pub fn clean(seed: u64) -> Self {
        NealCase {
            pi_o: 0.0,
            ..Self::fiducial(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pi_o) {
            return Err(Error::invalid(format!("neal: pi_o must lie in [0, 1), got {}", self.pi_o)));
        }
        if !(self.sigma_o > 0.0 && self.sigma_r > 0.0) || !self.b_o.is_finite() {
            return Err(Error::invalid("neal: noise scales must be positive and bias finite"));
        }
        if self.n_train == 0 {
            return Err(Error::invalid("neal: n_train must be positive"));
        }
        Ok(())
    }

    pub fn n_outliers(&self) -> usize {
        (self.pi_o * self.n_train as f64).round() as usize
    }
}

fn flags_from_sample(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<bool> {
    let mut flags = vec![false; n];
    for i in index::sample(rng, n, k) {
        flags[i] = true;
    }
    flags
}

/// Training set for one Neal replicate.
pub fn generate_neal(case: &NealCase) -> Result<Dataset> {
    case.validate()?;
    let n = case.n_train;
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let flags = flags_from_sample(&mut rng, n, case.n_outliers());
    let f_true: Vec<f64> = x.iter().map(|&v| neal_true_function(v)).collect();
    let y = f_true
        .iter()
        .zip(&flags)
        .map(|(f, &outlier)| {
            let z: f64 = rng.sample(StandardNormal);
            if outlier {
                f + case.b_o + case.sigma_o * z
            } else {
                f + case.sigma_r * z
            }
        })
        .collect();
    Ok(Dataset {
        x,
        y,
        is_outlier: Some(flags),
        f_true: Some(f_true),
    })
}

/// Sanity case: 90 points on `y = 0` with noise sd 0.01 and 10 gross
/// outliers at `y = 100`, inputs uniform on `[−3, 3]`.
pub fn generate_planted(seed: u64) -> Result<Dataset> {
    const N: usize = 100;
    const N_OUT: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..N).map(|_| rng.random_range(-3.0..3.0)).collect();
    let flags = flags_from_sample(&mut rng, N, N_OUT);
    let y = flags
        .iter()
        .map(|&out| {
            let noise = 0.01 * rng.sample::<f64, _>(StandardNormal);
            if out {
                100.0 + noise
            } else {
                noise
            }
        })
        .collect();
    Ok(Dataset {
        x,
        y,
        f_true: Some(vec![0.0; N]),
        is_outlier: Some(flags),
    })
}

/// `m` evenly spaced points on `[lo, hi]` with `y = f(x)` exactly.
pub fn noise_free_grid(lo: f64, hi: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Dataset> {
    if m < 2 {
        return Err(Error::invalid(format!("grid: need at least 2 points, got {m}")));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("grid: need lo < hi, got {lo}..{hi}")));
    }
    let step = (hi - lo) / (m - 1) as f64;
    let x: Vec<f64> = (0..m)
        .map(|i| if i == m - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
    Ok(Dataset {
        x,
        f_true: Some(y.clone()),
        y,
        is_outlier: Some(vec![false; m]),
    })
}

/// Noise-free evaluation grid on `[−3, 3]`.
pub fn generate_neal_test_grid(m: usize) -> Result<Dataset> {
    noise_free_grid(-3.0, 3.0, m, neal_true_function)
}

/// Range of the magnitude-like input of the cluster benchmark.
pub const CLUSTER_RANGE: (f64, f64) = (10.0, 18.0);

/// Ridge of the cluster benchmark. With `t = (x − 10)/8`,
/// `g = 0.6 + 0.9t + 0.4t² − 0.3t³`, increasing on the whole range.
pub fn cluster_ridge(x: f64) -> f64 {
    let t = (x - CLUSTER_RANGE.0) / (CLUSTER_RANGE.1 - CLUSTER_RANGE.0);
    0.6 + t * (0.9 + t * (0.4 - 0.3 * t))
}

/// Noise sd of the cluster benchmark: 0.005 at x = 10 rising linearly to 0.05 at x = 18.
pub fn cluster_noise_sd(x: f64) -> f64 {
    let t = (x - CLUSTER_RANGE.0) / (CLUSTER_RANGE.1 - CLUSTER_RANGE.0);
    0.005 + 0.045 * t
}

/// Heteroscedastic ridge with one-sided contamination.
///
/// Inliers scatter around [`cluster_ridge`] with sd [`cluster_noise_sd`].
/// Outliers sit above the ridge by an offset from `Uniform(0.02, 0.4)` plus
/// the absolute value of their noise draw, so they are always strictly above.
pub fn generate_cluster_like(n: usize, outlier_frac: f64, seed: u64) -> Result<Dataset> {
    if n < 50 {
        return Err(Error::invalid(format!("cluster: need n >= 50, got {n}")));
    }
    if !(0.0..1.0).contains(&outlier_frac) {
        return Err(Error::invalid(format!(
            "cluster: outlier_frac must lie in [0, 1), got {outlier_frac}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n)
        .map(|_| rng.random_range(CLUSTER_RANGE.0..CLUSTER_RANGE.1))
        .collect();
    let k = (outlier_frac * n as f64).round() as usize;
    let flags = flags_from_sample(&mut rng, n, k);
    let f_true: Vec<f64> = x.iter().map(|&v| cluster_ridge(v)).collect();
    let y = x
        .iter()
        .zip(&f_true)
        .zip(&flags)
        .map(|((&xi, f), &outlier)| {
            let z: f64 = rng.sample(StandardNormal);
            let sd = cluster_noise_sd(xi);
            if outlier {
                let offset = rng.random_range(0.02..0.4);
                f + offset + sd * z.abs()
            } else {
                f + sd * z
            }
        })
        .collect();
    Ok(Dataset {
        x,
        y,
        is_outlier: Some(flags),
        f_true: Some(f_true),
    })
}

/// Noise-free evaluation grid over the cluster range.
pub fn generate_cluster_test_grid(m: usize) -> Result<Dataset> {
    noise_free_grid(CLUSTER_RANGE.0, CLUSTER_RANGE.1, m, cluster_ridge)
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["x", "y"];
    if data.is_outlier.is_some() {
        header.push("is_outlier");
    }
    if data.f_true.is_some() {
        header.push("f_true");
    }
    out.write_record(&header).map_err(csv_io)?;
    for i in 0..data.len() {
        let mut row = vec![format_f64(data.x[i]), format_f64(data.y[i])];
        if let Some(flags) = &data.is_outlier {
            row.push(if flags[i] { "1" } else { "0" }.to_string());
        }
        if let Some(f) = &data.f_true {
            row.push(format_f64(f[i]));
        }
        out.write_record(&row).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Reads a CSV with header `x,y` and optional `is_outlier`, `f_true` columns
/// (any order, extra columns ignored). Errors carry the 1-based file line.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ix), Some(iy)) = (col("x"), col("y")) else {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must contain 'x' and 'y', found {:?}", headers.iter().collect::<Vec<_>>()),
        });
    };
    let i_flag = col("is_outlier");
    let i_true = col("f_true");

    let mut data = Dataset {
        is_outlier: i_flag.map(|_| Vec::new()),
        f_true: i_true.map(|_| Vec::new()),
        ..Default::default()
    };
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(row as u64 + 2, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        let num = |i: usize, name: &str| -> Result<f64> {
            let cell = record.get(i).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("row {}: column '{name}' is not a finite number: '{cell}'", row + 1),
                })
        };
        data.x.push(num(ix, "x")?);
        data.y.push(num(iy, "y")?);
        if let (Some(i), Some(flags)) = (i_flag, data.is_outlier.as_mut()) {
            let cell = record.get(i).unwrap_or("");
            flags.push(parse_flag(cell).ok_or_else(|| Error::Parse {
                line,
                message: format!("row {}: column 'is_outlier' is not a flag: '{cell}'", row + 1),
            })?);
        }
        if let Some(i) = i_true {
            let v = num(i, "f_true")?;
            data.f_true.as_mut().expect("column present").push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(data)
}

/// Reads only the `x` column of a CSV, for prediction queries.
pub fn read_inputs<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let Some(ix) = headers.iter().position(|h| h == "x") else {
        return Err(Error::Parse { line: 1, message: "header must contain 'x'".into() });
    };
    let mut x = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(row as u64 + 2, |p| p.line()),
            message: e.to_string(),
        })?;
        let cell = record.get(ix).unwrap_or("");
        let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
            line: record.position().map_or(row as u64 + 2, |p| p.line()),
            message: format!("row {}: column 'x' is not a finite number: '{cell}'", row + 1),
        })?;
        x.push(v);
    }
    if x.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neal_function_values() {
        assert!((neal_true_function(0.0) - 1.4).abs() < 1e-15);
        assert!((neal_true_function(3.0) - 2.0947).abs() < 1e-3);
        assert!((neal_true_function(3.0) - 2.094_944_905_422_543).abs() < 1e-12);
        assert!((neal_true_function(-3.0) + 1.2747).abs() < 1e-3);
        assert!((neal_true_function(-3.0) + 1.274_944_905_422_543).abs() < 1e-12);
    }

    #[test]
    fn clean_neal_has_inlier_noise_only() {
        let d = generate_neal(&NealCase::clean(3)).unwrap();
        assert!(d.is_outlier.as_ref().unwrap().iter().all(|f| !f));
        let r: Vec<f64> = d.y.iter().zip(d.f_true.as_ref().unwrap()).map(|(y, f)| y - f).collect();
        let mean = r.iter().sum::<f64>() / 100.0;
        let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((sd - 0.1).abs() < 0.03, "sd = {sd}");
        assert!(d.x.iter().all(|x| (-3.0..3.0).contains(x)));
    }

    #[test]
    fn fiducial_has_fifteen_outliers() {
        for seed in 0..5 {
            let d = generate_neal(&NealCase::fiducial(seed)).unwrap();
            assert_eq!(d.outlier_indices().unwrap().len(), 15);
        }
        assert_eq!(NealCase::abundant(0).n_outliers(), 45);
    }

    #[test]
    fn extreme_outlier_spread() {
        let mut all = Vec::new();
        for seed in 0..50 {
            let d = generate_neal(&NealCase::extreme(seed)).unwrap();
            let f = d.f_true.as_ref().unwrap();
            for i in d.outlier_indices().unwrap() {
                all.push(d.y[i] - f[i]);
            }
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 5.0).abs() < 1.5, "sd = {sd}");
    }

    #[test]
    fn skewed_outliers_are_biased() {
        let mut shift = 0.0;
        let mut count = 0.0;
        for seed in 0..20 {
            let d = generate_neal(&NealCase::skewed(seed, DEFAULT_SKEWED_BIAS)).unwrap();
            let f = d.f_true.as_ref().unwrap();
            for i in d.outlier_indices().unwrap() {
                shift += d.y[i] - f[i];
                count += 1.0;
            }
        }
        assert!((shift / count - 1.0).abs() < 0.25);
    }

    #[test]
    fn test_grid_construction() {
        let g = generate_neal_test_grid(2).unwrap();
        assert_eq!(g.x, vec![-3.0, 3.0]);
        let g = generate_neal_test_grid(2000).unwrap();
        assert_eq!(g.len(), 2000);
        assert!((g.x[1] - g.x[0] - 6.0 / 1999.0).abs() < 1e-15);
        assert!((g.x[1999] - g.x[1998] - 6.0 / 1999.0).abs() < 1e-12);
        for (x, y) in g.x.iter().zip(&g.y) {
            assert_eq!(*y, neal_true_function(*x));
        }
        assert!(g.is_outlier.unwrap().iter().all(|f| !f));
        assert!(generate_neal_test_grid(1).is_err());
    }

    #[test]
    fn cluster_clean_within_gaussian_tails() {
        let mut total = 0;
        let mut within = 0;
        for seed in 0..10 {
            let d = generate_cluster_like(200, 0.0, seed).unwrap();
            let f = d.f_true.as_ref().unwrap();
            for i in 0..d.len() {
                total += 1;
                if (d.y[i] - f[i]).abs() <= 6.0 * cluster_noise_sd(d.x[i]) {
                    within += 1;
                }
            }
        }
        assert!(within as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn cluster_outliers_one_sided() {
        let d = generate_cluster_like(300, 0.3, 5).unwrap();
        let f = d.f_true.as_ref().unwrap();
        let out = d.outlier_indices().unwrap();
        assert_eq!(out.len(), 90);
        assert!(out.iter().all(|&i| d.y[i] - f[i] > 0.0));
    }

    #[test]
    fn cluster_noise_grows_with_x() {
        for seed in 0..20 {
            let d = generate_cluster_like(400, 0.3, seed).unwrap();
            let f = d.f_true.as_ref().unwrap();
            let flags = d.is_outlier.as_ref().unwrap();
            let sd_where = |keep: &dyn Fn(f64) -> bool| {
                let r: Vec<f64> = (0..d.len())
                    .filter(|&i| !flags[i] && keep(d.x[i]))
                    .map(|i| d.y[i] - f[i])
                    .collect();
                (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
            };
            assert!(sd_where(&|x| x > 16.0) > sd_where(&|x| x < 12.0), "seed {seed}");
        }
    }

    #[test]
    fn cluster_ridge_is_increasing() {
        let g = generate_cluster_test_grid(500).unwrap();
        assert!(g.y.windows(2).all(|w| w[1] > w[0]));
        assert!(generate_cluster_like(49, 0.1, 0).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_neal(&NealCase::fiducial(42)).unwrap();
        assert_eq!(a, generate_neal(&NealCase::fiducial(42)).unwrap());
        assert_ne!(a, generate_neal(&NealCase::fiducial(43)).unwrap());
        let c = generate_cluster_like(100, 0.3, 9).unwrap();
        assert_eq!(c, generate_cluster_like(100, 0.3, 9).unwrap());
    }

    #[test]
    fn truth_does_not_depend_on_noise() {
        let a = generate_neal(&NealCase::fiducial(1)).unwrap();
        let b = generate_neal(&NealCase::extreme(1)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.f_true, b.f_true);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(read_csv("x,y\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(read_csv("".as_bytes()), Err(Error::Parse { .. })));
        match read_csv("x,y\n1,2\n3,oops\n".as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("row 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn planted_case_layout() {
        let d = generate_planted(5).unwrap();
        d.validate().unwrap();
        let out = d.outlier_indices().unwrap();
        assert_eq!(out.len(), 10);
        for i in 0..100 {
            let target = if out.contains(&i) { 100.0 } else { 0.0 };
            assert!((d.y[i] - target).abs() < 0.1);
            assert!((-3.0..3.0).contains(&d.x[i]));
        }
        assert_eq!(generate_planted(5).unwrap(), d);
    }

    #[test]
    fn query_reader_needs_only_x() {
        assert_eq!(read_inputs("x\n1.5\n-2\n".as_bytes()).unwrap(), vec![1.5, -2.0]);
        assert_eq!(read_inputs("y,x\n9,0.25\n".as_bytes()).unwrap(), vec![0.25]);
        assert!(matches!(read_inputs("x\n1\nabc\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_inputs("x\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(read_inputs("t\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_accepts_reordered_and_extra_columns() {
        let d = read_csv("id,y,x\n0, 2.5, 1\n1,3,-1e-3\n".as_bytes()).unwrap();
        assert_eq!(d.x, vec![1.0, -1e-3]);
        assert_eq!(d.y, vec![2.5, 3.0]);
        assert!(d.is_outlier.is_none());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(seed in 0u64..1000, full in any::<bool>()) {
            let mut d = generate_neal(&NealCase::fiducial(seed)).unwrap();
            if !full {
                d.is_outlier = None;
                d.f_true = None;
            }
            let mut buf = Vec::new();
            write_csv(&d, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
