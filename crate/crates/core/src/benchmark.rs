//! Replicate benchmark comparing the standard GP, ITGP (with and without
//! reweighting) and the ideal fit on ground-truth inliers.
//!
//! Each replicate `r` draws its training set with seed `base + r`, fits every
//! method, and scores the posterior mean on a noise-free test grid.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    format_f64, generate_cluster_like, generate_cluster_test_grid, generate_neal, generate_neal_test_grid,
    Dataset, NealCase, DEFAULT_SKEWED_BIAS,
};
use crate::error::{Error, Result};
use crate::gp::{fit, TrainedGp};
use crate::itgp::{concentrate, reweight, ItgpConfig};
use crate::kernels::KernelSpec;
use crate::stats::compute_metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gp,
    Itgp,
    ItgpReweight,
    Ideal,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Gp, Method::Itgp, Method::ItgpReweight, Method::Ideal];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gp => "gp",
            Method::Itgp => "itgp",
            Method::ItgpReweight => "itgp-reweight",
            Method::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchCase {
    Fiducial,
    Abundant,
    Skewed,
    Extreme,
    Cluster,
}

impl BenchCase {
    pub const ALL: [BenchCase; 5] = [
        BenchCase::Fiducial,
        BenchCase::Abundant,
        BenchCase::Skewed,
        BenchCase::Extreme,
        BenchCase::Cluster,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchCase::Fiducial => "fiducial",
            BenchCase::Abundant => "abundant",
            BenchCase::Skewed => "skewed",
            BenchCase::Extreme => "extreme",
            BenchCase::Cluster => "cluster",
        }
    }

    pub fn kernel(self) -> KernelSpec {
        match self {
            BenchCase::Cluster => KernelSpec::Matern32,
            _ => KernelSpec::SquaredExponential,
        }
    }
}

impl std::str::FromStr for BenchCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown benchmark case '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub cases: Vec<BenchCase>,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    /// ITGP settings; `spec` is overridden per case and the optimizer seed
    /// per replicate.
    pub itgp: ItgpConfig,
    pub skewed_bias: f64,
    pub cluster_n: usize,
    pub cluster_outlier_frac: f64,
    pub test_points: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            cases: vec![BenchCase::Fiducial],
            replicates: 50,
            seed: 0,
            workers: 1,
            itgp: ItgpConfig::default(),
            skewed_bias: DEFAULT_SKEWED_BIAS,
            cluster_n: 200,
            cluster_outlier_frac: 0.3,
            test_points: 2000,
        }
    }
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub case: BenchCase,
    pub method: Method,
    pub rmse: f64,
    pub mae: f64,
    pub wall_time: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Failure message; metrics are NaN when set.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: BenchCase,
    pub method: Method,
    pub mean_rmse: f64,
    pub mean_mae: f64,
    pub mean_time: f64,
    /// Completed runs the means are taken over.
    pub n_replicates: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub records: Vec<RunRecord>,
}

impl BenchmarkReport {
    pub fn row(&self, case: BenchCase, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.case == case && r.method == method)
    }

    pub fn failure_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| !r.succeeded()).count() as f64 / self.records.len() as f64
    }

    fn aggregate(records: Vec<RunRecord>, cases: &[BenchCase]) -> Self {
        let mut rows = Vec::new();
        for &case in cases {
            for method in Method::ALL {
                let runs: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| r.case == case && r.method == method)
                    .collect();
                let ok: Vec<&&RunRecord> = runs.iter().filter(|r| r.succeeded()).collect();
                let mean = |f: fn(&RunRecord) -> f64| {
                    if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                    }
                };
                rows.push(ReportRow {
                    case,
                    method,
                    mean_rmse: mean(|r| r.rmse),
                    mean_mae: mean(|r| r.mae),
                    mean_time: mean(|r| r.wall_time),
                    n_replicates: ok.len(),
                    n_failed: runs.len() - ok.len(),
                });
            }
        }
        BenchmarkReport { rows, records }
    }

    /// Aligned plain-text table, one block per case.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>10}{:>10}{:>12}{:>6}{:>6}", "", "RMSE", "MAE", "Time [s]", "n", "fail");
        let mut current = None;
        for row in &self.rows {
            if current != Some(row.case) {
                current = Some(row.case);
                let _ = writeln!(out, "{}", "-".repeat(60));
                let _ = writeln!(out, "{}", row.case.name());
            }
            let _ = writeln!(
                out,
                "{:<16}{:>10.4}{:>10.4}{:>12.4}{:>6}{:>6}",
                row.method.name(),
                row.mean_rmse,
                row.mean_mae,
                row.mean_time,
                row.n_replicates,
                row.n_failed
            );
        }
        let _ = writeln!(out, "{}", "-".repeat(60));
        let failed: Vec<&RunRecord> = self.records.iter().filter(|r| !r.succeeded()).collect();
        if failed.is_empty() {
            let _ = writeln!(out, "all runs completed");
        } else {
            let _ = writeln!(out, "{} failed runs excluded from means:", failed.len());
            for r in failed {
                let _ = writeln!(
                    out,
                    "  {} / {} / seed {}: {}",
                    r.case.name(),
                    r.method.name(),
                    r.seed,
                    r.error.as_deref().unwrap_or("")
                );
            }
        }
        let _ = writeln!(out, "note: the Student-t likelihood GP is not part of this benchmark.");
        out
    }

    pub fn write_report_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "case,method,mean_rmse,mean_mae,mean_time,n_replicates,n_failed")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.case.name(),
                r.method.name(),
                format_f64(r.mean_rmse),
                format_f64(r.mean_mae),
                format_f64(r.mean_time),
                r.n_replicates,
                r.n_failed
            )?;
        }
        Ok(())
    }

    /// Per-run records without timings, so the file is reproducible byte
    /// for byte from the seed.
    pub fn write_runs_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "seed,case,method,rmse,mae,n_iterations,converged,status")?;
        for r in &self.records {
            let status = r.error.as_deref().map_or("ok".to_string(), |e| format!("\"failed: {}\"", e.replace('"', "'")));
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.seed,
                r.case.name(),
                r.method.name(),
                format_f64(r.rmse),
                format_f64(r.mae),
                r.n_iterations,
                r.converged,
                status
            )?;
        }
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "seed,case,method,wall_time")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.seed, r.case.name(), r.method.name(), format_f64(r.wall_time))?;
        }
        Ok(())
    }

    /// Writes `table.txt`, `report.csv`, `runs.csv` and `timings.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.txt"), self.table())?;
        let open = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        self.write_report_csv(open("report.csv")?)?;
        self.write_runs_csv(open("runs.csv")?)?;
        self.write_timings_csv(open("timings.csv")?)?;
        Ok(())
    }
}

/// Training set for one replicate of a case.
pub fn training_set(case: BenchCase, seed: u64, cfg: &BenchmarkConfig) -> Result<Dataset> {
    match case {
        BenchCase::Fiducial => generate_neal(&NealCase::fiducial(seed)),
        BenchCase::Abundant => generate_neal(&NealCase::abundant(seed)),
        BenchCase::Skewed => generate_neal(&NealCase::skewed(seed, cfg.skewed_bias)),
        BenchCase::Extreme => generate_neal(&NealCase::extreme(seed)),
        BenchCase::Cluster => generate_cluster_like(cfg.cluster_n, cfg.cluster_outlier_frac, seed),
    }
}

pub fn test_set(case: BenchCase, m: usize) -> Result<Dataset> {
    match case {
        BenchCase::Cluster => generate_cluster_test_grid(m),
        _ => generate_neal_test_grid(m),
    }
}

struct Scored {
    rmse: f64,
    mae: f64,
}

fn score(gp: &TrainedGp, test: &Dataset) -> Result<Scored> {
    let pred = gp.predict(&test.x)?;
    let m = compute_metrics(&pred.mean, test.f_true.as_ref().unwrap_or(&test.y))?;
    Ok(Scored { rmse: m.rmse, mae: m.mae })
}

/// Fits all four methods on one replicate. Always returns one record per method.
pub fn run_replicate(case: BenchCase, seed: u64, test: &Dataset, cfg: &BenchmarkConfig) -> Vec<RunRecord> {
    let mut itgp_cfg = cfg.itgp;
    itgp_cfg.spec = case.kernel();
    itgp_cfg.optimizer.seed = seed;

    let record = |method, outcome: Result<(Scored, f64, usize, bool)>| match outcome {
        Ok((s, wall_time, n_iterations, converged)) => RunRecord {
            seed,
            case,
            method,
            rmse: s.rmse,
            mae: s.mae,
            wall_time,
            n_iterations,
            converged,
            error: None,
        },
        Err(e) => {
            log::warn!("{} / {} / seed {seed} failed: {e}", case.name(), method.name());
            RunRecord {
                seed,
                case,
                method,
                rmse: f64::NAN,
                mae: f64::NAN,
                wall_time: f64::NAN,
                n_iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            }
        }
    };

    let data = match training_set(case, seed, cfg) {
        Ok(d) => d,
        Err(e) => {
            let msg = e.to_string();
            return Method::ALL
                .into_iter()
                .map(|m| record(m, Err(Error::invalid(msg.clone()))))
                .collect();
        }
    };

    let mut out = Vec::with_capacity(4);

    let start = Instant::now();
    let gp = fit(&data, itgp_cfg.spec, &itgp_cfg.optimizer);
    let elapsed = start.elapsed().as_secs_f64();
    out.push(record(Method::Gp, gp.and_then(|g| Ok((score(&g, test)?, elapsed, 1, true)))));

    let start = Instant::now();
    let conc = concentrate(&data, &itgp_cfg);
    let t_conc = start.elapsed().as_secs_f64();
    match conc {
        Ok(conc) => {
            let raw = conc.clone().into_result();
            out.push(record(
                Method::Itgp,
                score(&raw.gp, test).map(|s| (s, t_conc, raw.n_iterations, raw.converged)),
            ));
            let mut rw_cfg = itgp_cfg;
            if rw_cfg.alpha2 == 0.0 {
                rw_cfg.alpha2 = ItgpConfig::default().alpha2;
            }
            let start = Instant::now();
            let rw = reweight(&data, conc, &rw_cfg);
            let t_rw = t_conc + start.elapsed().as_secs_f64();
            out.push(record(
                Method::ItgpReweight,
                rw.and_then(|r| Ok((score(&r.gp, test)?, t_rw, r.n_iterations, r.converged))),
            ));
        }
        Err(e) => {
            let msg = e.to_string();
            out.push(record(Method::Itgp, Err(Error::invalid(msg.clone()))));
            out.push(record(Method::ItgpReweight, Err(Error::invalid(msg))));
        }
    }

    let ideal = data
        .inlier_indices()
        .ok_or_else(|| Error::invalid("ideal fit needs ground-truth flags"))
        .and_then(|idx| {
            let clean = data.subset(&idx);
            let start = Instant::now();
            let g = fit(&clean, itgp_cfg.spec, &itgp_cfg.optimizer)?;
            let elapsed = start.elapsed().as_secs_f64();
            Ok((score(&g, test)?, elapsed, 1, true))
        });
    out.push(record(Method::Ideal, ideal));
    out
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.replicates == 0 || cfg.workers == 0 {
        return Err(Error::invalid("benchmark: replicates and workers must be >= 1"));
    }
    if cfg.cases.is_empty() {
        return Err(Error::invalid("benchmark: no cases selected"));
    }
    cfg.itgp.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("benchmark: cannot start worker pool: {e}")))?;

    let mut records = Vec::new();
    for &case in &cfg.cases {
        let test = test_set(case, cfg.test_points)?;
        let per_seed: Vec<Vec<RunRecord>> = pool.install(|| {
            (0..cfg.replicates as u64)
                .into_par_iter()
                .map(|r| run_replicate(case, cfg.seed.wrapping_add(r), &test, cfg))
                .collect()
        });
        log::info!("case {} done ({} replicates)", case.name(), cfg.replicates);
        records.extend(per_seed.into_iter().flatten());
    }
    Ok(BenchmarkReport::aggregate(records, &cfg.cases))
}
