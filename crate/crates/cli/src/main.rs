//! `robustgp`: fit, predict, flag outliers and run the synthetic benchmark.
//!
//! Exit codes: 0 on success, 2 for bad input (unparsable CSV or JSON,
//! invalid flags, model mismatch), 3 for numerical failure or a benchmark
//! where more than a fifth of the runs failed.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robustgp::benchmark::{run_benchmark, BenchCase, BenchmarkConfig};
use robustgp::datasets::{format_f64, noise_free_grid, read_csv, read_inputs};
use robustgp::gp::fit;
use robustgp::itgp::{detect_outliers, itgp_fit, scaled_residuals};
use robustgp::{Dataset, ItgpConfig, ItgpResult, KernelSpec, OptimizerConfig, TrainedGp};
use serde::{Deserialize, Serialize};

use config::FileConfig;

const DEFAULT_THRESHOLD: f64 = 2.0;
const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Parser)]
#[command(name = "robustgp", version, about = "Robust Gaussian process regression by iterative trimming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV with columns x,y and save it as JSON.
    Fit(FitArgs),
    /// Predict with a saved model on a query CSV (column x) or a grid.
    Predict(PredictArgs),
    /// List rows of a CSV whose normalised residual exceeds a threshold.
    Outliers(OutliersArgs),
    /// Run the synthetic benchmark and write a table plus CSV reports.
    Benchmark(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Gp,
    Itgp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseArg {
    Fiducial,
    Abundant,
    Skewed,
    Extreme,
    Cluster,
    All,
}

impl CaseArg {
    fn cases(self) -> Vec<BenchCase> {
        match self {
            CaseArg::Fiducial => vec![BenchCase::Fiducial],
            CaseArg::Abundant => vec![BenchCase::Abundant],
            CaseArg::Skewed => vec![BenchCase::Skewed],
            CaseArg::Extreme => vec![BenchCase::Extreme],
            CaseArg::Cluster => vec![BenchCase::Cluster],
            CaseArg::All => BenchCase::ALL.to_vec(),
        }
    }
}

/// Trimming and optimizer settings shared by `fit` and `benchmark`.
#[derive(Args)]
struct TrimFlags {
    /// Final kept fraction of the concentration phase [default: 0.5]
    #[arg(long)]
    alpha1: Option<f64>,
    /// Reweighting coverage; 0 disables reweighting [default: 0.95]
    #[arg(long)]
    alpha2: Option<f64>,
    /// Iterations over which the kept fraction shrinks from 1 [default: 5]
    #[arg(long)]
    n_shrink: Option<usize>,
    /// Maximum concentration iterations [default: 10]
    #[arg(long)]
    n_maxiter: Option<usize>,
    /// Hyperparameter optimizer starts per fit [default: 3]
    #[arg(long)]
    restarts: Option<usize>,
    /// Seed for restart perturbations, and the base benchmark seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// TOML settings file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV with header x,y
    input: PathBuf,
    /// Where to write the model JSON
    #[arg(long)]
    out: PathBuf,
    /// Plain GP, or iterative trimming
    #[arg(long, value_enum, default_value = "itgp")]
    method: FitMethod,
    /// Kernel family: se or matern32 [default: se]
    #[arg(long)]
    kernel: Option<KernelSpec>,
    #[command(flatten)]
    trim: TrimFlags,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit`
    #[arg(long)]
    model: PathBuf,
    /// Query CSV with an x column
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    input: Option<PathBuf>,
    /// Evenly spaced query grid, written lo:hi:m
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Fail unless the model uses this kernel
    #[arg(long)]
    kernel: Option<KernelSpec>,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OutliersArgs {
    /// Model JSON written by `fit`
    #[arg(long)]
    model: PathBuf,
    /// CSV with header x,y to screen
    input: PathBuf,
    /// Flag rows with normalised residual above this [default: 2]
    #[arg(long)]
    threshold: Option<f64>,
    /// Fail unless the model uses this kernel
    #[arg(long)]
    kernel: Option<KernelSpec>,
    /// TOML settings file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset case to run
    #[arg(long, value_enum, default_value = "all")]
    case: CaseArg,
    /// Replicates per case [default: 50]
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads; 1 keeps timings comparable [default: 1]
    #[arg(long)]
    workers: Option<usize>,
    /// Outlier bias of the skewed case [default: 1]
    #[arg(long)]
    skewed_bias: Option<f64>,
    /// Output directory for table.txt, report.csv, runs.csv and timings.csv
    #[arg(long, default_value = "benchmark-out")]
    out: PathBuf,
    #[command(flatten)]
    trim: TrimFlags,
}

/// A saved model: the trained GP, plus the trimming metadata for ITGP fits.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelFile {
    Gp { gp: TrainedGp },
    Itgp(ItgpResult),
}

impl ModelFile {
    fn gp(&self) -> &TrainedGp {
        match self {
            ModelFile::Gp { gp } => gp,
            ModelFile::Itgp(r) => &r.gp,
        }
    }

    /// Consistency factor; 1 for an untrimmed fit.
    fn c(&self) -> f64 {
        match self {
            ModelFile::Gp { .. } => 1.0,
            ModelFile::Itgp(r) => r.c,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<robustgp::Error> for CliError {
    fn from(e: robustgp::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> CliResult<Dataset> {
    read_csv(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path, kernel: Option<KernelSpec>) -> CliResult<ModelFile> {
    let model: ModelFile = serde_json::from_reader(open(path)?)
        .map_err(|e| CliError::Input(format!("{}: not a valid model file: {e}", path.display())))?;
    if let Some(k) = kernel {
        let found = model.gp().spec();
        if k != found {
            return Err(CliError::Input(format!(
                "model uses kernel '{found}' but --kernel {k} was requested"
            )));
        }
    }
    Ok(model)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Input(format!("--grid expects lo:hi:m, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, m] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let m: usize = m.trim().parse().map_err(|_| bad())?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok(noise_free_grid(lo, hi, m, |_| 0.0)?.x)
}

fn itgp_config(trim: &TrimFlags, file: &FileConfig, kernel: Option<KernelSpec>) -> CliResult<ItgpConfig> {
    let base = ItgpConfig::default();
    let opt = OptimizerConfig::default();
    let cfg = ItgpConfig {
        alpha1: trim.alpha1.or(file.alpha1).unwrap_or(base.alpha1),
        alpha2: trim.alpha2.or(file.alpha2).unwrap_or(base.alpha2),
        n_shrink: trim.n_shrink.or(file.n_shrink).unwrap_or(base.n_shrink),
        n_maxiter: trim.n_maxiter.or(file.n_maxiter).unwrap_or(base.n_maxiter),
        optimizer: OptimizerConfig {
            n_restarts: trim.restarts.or(file.restarts).unwrap_or(opt.n_restarts),
            seed: trim.seed.or(file.seed).unwrap_or(opt.seed),
            ..opt
        },
        spec: kernel.or(file.kernel).unwrap_or(base.spec),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let file = FileConfig::load(args.trim.config.as_deref()).map_err(CliError::Input)?;
    let cfg = itgp_config(&args.trim, &file, args.kernel)?;
    let data = read_dataset(&args.input)?;
    let model = match args.method {
        FitMethod::Gp => ModelFile::Gp { gp: fit(&data, cfg.spec, &cfg.optimizer)? },
        FitMethod::Itgp => ModelFile::Itgp(itgp_fit(&data, &cfg)?),
    };
    let mut w = output(Some(&args.out))?;
    serde_json::to_writer_pretty(&mut w, &model).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;

    let inliers = match &model {
        ModelFile::Gp { .. } => data.len(),
        ModelFile::Itgp(r) => r.inliers.len(),
    };
    let mut summary = format!("n={} inliers={inliers} c={} kernel={}", data.len(), model.c(), cfg.spec);
    if let ModelFile::Itgp(r) = &model {
        summary += &format!(" iterations={} converged={}", r.n_iterations, r.converged);
        if r.reweight_skipped {
            summary += " reweight=skipped";
        }
    }
    println!("{summary}");
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> CliResult<()> {
    let model = load_model(&args.model, args.kernel)?;
    let x = match (&args.input, &args.grid) {
        (Some(path), _) => read_inputs(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        (None, Some(grid)) => parse_grid(grid)?,
        (None, None) => return Err(CliError::Input("give --input or --grid".into())),
    };
    let pred = model.gp().predict(&x)?;
    let scaled = match &model {
        ModelFile::Itgp(r) => Some(r.scaled_sd(&pred)),
        ModelFile::Gp { .. } => None,
    };

    let mut w = output(args.out.as_deref())?;
    write!(w, "x,mean,sd_latent,sd_observed")?;
    writeln!(w, "{}", if scaled.is_some() { ",sd_scaled" } else { "" })?;
    for i in 0..x.len() {
        write!(
            w,
            "{},{},{},{}",
            format_f64(x[i]),
            format_f64(pred.mean[i]),
            format_f64(pred.var_latent[i].sqrt()),
            format_f64(pred.var_observed[i].sqrt())
        )?;
        match &scaled {
            Some(s) => writeln!(w, ",{}", format_f64(s[i]))?,
            None => writeln!(w)?,
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_outliers(args: OutliersArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref()).map_err(CliError::Input)?;
    let threshold = args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let model = load_model(&args.model, args.kernel)?;
    let data = read_dataset(&args.input)?;

    // Residuals of the supplied rows under the saved model, which need not
    // be the rows it was trained on.
    let screened = ItgpResult {
        gp: model.gp().clone(),
        c: model.c(),
        inliers: Vec::new(),
        scaled_residuals: scaled_residuals(model.gp(), &data)?,
        n_iterations: 0,
        converged: true,
        reweighted: false,
        reweight_skipped: false,
    };
    let flagged = detect_outliers(&screened, &data, threshold)?;
    let scale = screened.c.sqrt();

    let mut w = output(args.out.as_deref())?;
    writeln!(w, "index,x,y,r_prime")?;
    for i in flagged {
        writeln!(
            w,
            "{i},{},{},{}",
            format_f64(data.x[i]),
            format_f64(data.y[i]),
            format_f64(screened.scaled_residuals[i] / scale)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_benchmark(args: BenchArgs) -> CliResult<()> {
    let file = FileConfig::load(args.trim.config.as_deref()).map_err(CliError::Input)?;
    let itgp = itgp_config(&args.trim, &file, None)?;
    let base = BenchmarkConfig::default();
    let cfg = BenchmarkConfig {
        cases: args.case.cases(),
        replicates: args.replicates.or(file.replicates).unwrap_or(base.replicates),
        seed: itgp.optimizer.seed,
        workers: args.workers.or(file.workers).unwrap_or(base.workers),
        skewed_bias: args.skewed_bias.or(file.skewed_bias).unwrap_or(base.skewed_bias),
        itgp,
        ..base
    };
    let report = run_benchmark(&cfg)?;
    report.write_to_dir(&args.out)?;
    print!("{}", report.table());

    let failed = report.failure_fraction();
    if failed > MAX_FAILURE_FRACTION {
        return Err(CliError::Numerical(format!(
            "{:.0}% of benchmark runs failed (limit {:.0}%)",
            100.0 * failed,
            100.0 * MAX_FAILURE_FRACTION
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Outliers(a) => cmd_outliers(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
