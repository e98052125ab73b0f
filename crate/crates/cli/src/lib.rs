//! Command handlers shared by the `sketchf` and `simlab` binaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sketchf_core::ftest::{classical_f, sketched_f};
use sketchf_core::intrinsic::{default_eta, min_intrinsic_dim, recommend_k};
use sketchf_core::models::{build_spectrum, draw_coefficients, draw_sketch, random_cov, CoefficientDist, SpectrumModel};
use sketchf_core::oracles;
use sketchf_core::power;
use sketchf_simlab::{emit, Format, SimulationConfig};

/// Process exit status: 0 when every check passed, 1 otherwise.
pub type Status = u8;

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Reads a headerless numeric CSV into a dense matrix.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("{} line {}: bad number '{f}'", path.display(), i + 1)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!("{} line {}: expected {} fields, found {}", path.display(), i + 1, first.len(), row.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} is empty", path.display());
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// Design matrix, headerless CSV with one observation per row.
    #[arg(long)]
    pub design: PathBuf,
    /// Response, headerless CSV with a single column.
    #[arg(long)]
    pub response: PathBuf,
    /// Sketch dimension; the classical test is run when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

pub fn run_test(args: &TestArgs) -> Result<Status> {
    let x = read_matrix(&args.design)?;
    let y = read_matrix(&args.response)?;
    if y.ncols() != 1 {
        bail!("response must have one column, found {}", y.ncols());
    }
    let y = DVector::from_column_slice(y.as_slice());
    let report = match args.k {
        Some(k) => sketched_f(&x, &y, &draw_sketch(x.ncols(), k, args.seed)?, args.alpha)?,
        None => classical_f(&x, &y, args.alpha)?,
    };
    print_json(&report)?;
    Ok(0)
}

#[derive(Subcommand, Debug)]
pub enum PowerArgs {
    /// Classical F-test, signal `βᵀΣβ/σ²`.
    Classical {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        signal: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Sketched F-test, retained signal `Δ²/σ²`.
    Sketched {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta_sq: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Sketched F-test when the whole signal is retained.
    Intrinsic {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        signal: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Serialize)]
struct PowerOut {
    test: &'static str,
    power: f64,
}

pub fn run_power(args: &PowerArgs) -> Result<Status> {
    let (test, power) = match *args {
        PowerArgs::Classical { n, p, signal, alpha } => ("classical", power::power_classical(n, p, signal, alpha)?),
        PowerArgs::Sketched { n, k, delta_sq, alpha } => ("sketched", power::power_sketched(n, k, delta_sq, alpha)?),
        PowerArgs::Intrinsic { n, k, signal, alpha } => {
            ("intrinsic", power::power_sketched_intrinsic(n, k, signal, alpha)?)
        }
    };
    print_json(&PowerOut { test, power })?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct DimArgs {
    /// Spectrum model as JSON, e.g. `{"kind":"polynomial","alpha":2,"p":1000}`.
    #[arg(long)]
    pub spectrum: String,
    #[arg(long, default_value = "gaussian")]
    pub coefficients: CoefficientDist,
    /// Sample size used for the recommended sketch dimension.
    #[arg(long)]
    pub n: usize,
    /// Tolerance; defaults to `1/ln p`.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct DimOut {
    p: usize,
    eta: f64,
    r: Option<usize>,
    k: usize,
    signal: f64,
    retained_signal: Option<f64>,
}

pub fn run_dim(args: &DimArgs) -> Result<Status> {
    let model: SpectrumModel = serde_json::from_str(&args.spectrum).context("parsing --spectrum")?;
    let p = model.p;
    let cov = random_cov(build_spectrum(&model)?, args.seed)?;
    let beta = draw_coefficients(p, args.coefficients, args.seed.wrapping_add(1))?.beta;
    let eta = args.eta.unwrap_or_else(|| default_eta(p));
    let r = min_intrinsic_dim(&cov.rotate(&beta), cov.spectrum(), eta)?;
    let k = recommend_k(args.n, r).min(p);
    let retained = match power::delta_k_sq(&beta, &cov, &draw_sketch(p, k, args.seed.wrapping_add(2))?) {
        Ok(d) => Some(d),
        Err(sketchf_core::Error::SingularSketch(_)) => None,
        Err(e) => return Err(e.into()),
    };
    print_json(&DimOut {
        p,
        eta,
        r,
        k,
        signal: cov.signal(&beta),
        retained_signal: retained,
    })?;
    Ok(0)
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Lemma {
    /// Two-sided tail of a Gaussian quadratic form.
    QuadraticTail,
    /// Smallest singular value of a spectrum-weighted Gaussian sketch.
    LambdaSketch,
    /// Extreme eigenvalues of a normalised Wishart Gram matrix.
    Wishart,
    /// Trace-norm inequality on a fixed spectrum.
    NormIneq,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    pub lemma: Lemma,
    /// Spectrum model as JSON (quadratic-tail, lambda-sketch, norm-ineq).
    #[arg(long)]
    pub spectrum: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Columns of the sketch (lambda-sketch) or rows of the Gaussian block (wishart).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Ambient dimension for the Wishart check.
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run_oracle(args: &OracleArgs) -> Result<Status> {
    let spectrum = || -> Result<Vec<f64>> {
        let text = args.spectrum.as_deref().context("this check needs --spectrum")?;
        let model: SpectrumModel = serde_json::from_str(text).context("parsing --spectrum")?;
        Ok(build_spectrum(&model)?)
    };
    let pass = match args.lemma {
        Lemma::QuadraticTail => {
            let out = oracles::quadratic_tail_check(&spectrum()?, args.t, args.reps, args.seed)?;
            print_json(&out)?;
            out.pass
        }
        Lemma::LambdaSketch => {
            let out = oracles::lambda_sketch_singular_check(&spectrum()?, args.k, args.t, args.reps, args.seed)?;
            print_json(&out)?;
            out.pass
        }
        Lemma::Wishart => {
            let out = oracles::wishart_eigen_check(args.k, args.p, args.t, args.reps, args.seed)?;
            print_json(&out)?;
            out.pass
        }
        Lemma::NormIneq => {
            let out = oracles::matrix_norm_ineq_check(&spectrum()?)?;
            print_json(&out)?;
            out.pass
        }
    };
    Ok(if pass { 0 } else { 1 })
}

#[derive(Subcommand, Debug)]
pub enum SimlabCommand {
    /// Run one experiment from a JSON configuration.
    Run(RunArgs),
    /// Print the JSON schema of experiment configurations.
    Schema,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving `<experiment>.<format>`.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; overrides the configuration.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
}

pub fn run_simlab(cmd: &SimlabCommand) -> Result<Status> {
    match cmd {
        SimlabCommand::Schema => {
            print_json(&sketchf_simlab::config::schema())?;
            Ok(0)
        }
        SimlabCommand::Run(args) => {
            let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
            let mut cfg = SimulationConfig::from_json(&text)?.with_env_seed()?;
            if args.workers.is_some() {
                cfg.workers = args.workers;
            }
            cfg.validate()?;
            let output = sketchf_simlab::run(&cfg)?;
            fs::create_dir_all(&args.out)?;
            let path = args.out.join(format!("{}.{}", output.name(), args.format.extension()));
            emit(&output, args.format, &path)?;
            for v in output.verdicts() {
                eprintln!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            eprintln!("wrote {}", path.display());
            Ok(if output.passed() { 0 } else { 1 })
        }
    }
}
