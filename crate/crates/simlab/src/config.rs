//! Experiment configuration, deserialised from JSON.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sketchf_core::intrinsic::example_k_formula;
use sketchf_core::models::{CoefficientDist, EntryDistribution, SpectrumKind, SpectrumModel};

use crate::error::{Error, Result};

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "SKETCHF_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulationConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Thread count; the machine default when absent. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Experiment {
    Table1(Table1Config),
    SignalStability(StabilityConfig),
    ErrorCurve(ErrorCurveConfig),
    NullCalibration(NullCalibrationConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Table1(_) => "table1",
            Experiment::SignalStability(_) => "signal_stability",
            Experiment::ErrorCurve(_) => "error_curve",
            Experiment::NullCalibration(_) => "null_calibration",
        }
    }
}

/// How the sketch dimension is chosen from `(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum KPolicy {
    /// `min(⌊n/2⌋, p)`.
    HalfN,
    /// `⌊min(3 (ln p)^{1/(α-1)}, n/2)⌋`.
    Formula { alpha_decay: f64 },
    Fixed { k: usize },
    /// `min(⌊multiplier · ln p⌋, p)`.
    LogP { multiplier: f64 },
}

impl KPolicy {
    pub fn resolve(&self, n: usize, p: usize) -> Result<usize> {
        let k = match *self {
            KPolicy::HalfN => (n / 2).min(p),
            KPolicy::Formula { alpha_decay } => example_k_formula(p, n, alpha_decay)?,
            KPolicy::Fixed { k } => k,
            KPolicy::LogP { multiplier } => {
                if !(multiplier > 0.0) || p < 2 {
                    return Err(Error::Config(format!("log_p policy needs multiplier > 0 and p >= 2, got {multiplier}")));
                }
                ((multiplier * (p as f64).ln()).floor() as usize).min(p)
            }
        };
        if k < 1 || k >= n || k > p {
            return Err(Error::Config(format!("sketch dimension k={k} must satisfy 1 <= k < n={n} and k <= p={p}")));
        }
        Ok(k)
    }
}

/// One decay setting of the error-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DecayCase {
    pub label: String,
    pub spectrum: SpectrumKind,
    pub design_entries: EntryDistribution,
    pub k_policy: KPolicy,
}

/// Targets `‖β‖₂ = c1` and `‖Σ‖_F = c2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Scalings {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Table1Config {
    pub n: usize,
    pub p: usize,
    pub cases: Vec<DecayCase>,
    pub scalings: Scalings,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientDist,
    #[serde(default = "gaussian")]
    pub noise: EntryDistribution,
}

fn default_coefficients() -> CoefficientDist {
    CoefficientDist::BinomMix
}

fn gaussian() -> EntryDistribution {
    EntryDistribution::Gaussian
}

/// Retained-signal ratio on polynomial spectra, `n = ⌊10 ln² p⌋` and the
/// example sketch-size formula, with `doublings` nested widenings of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StabilityConfig {
    pub p_grid: Vec<usize>,
    pub decays: Vec<f64>,
    #[serde(default = "default_doublings")]
    pub doublings: u32,
}

fn default_doublings() -> u32 {
    2
}

/// Type II error along a `p` grid with `n = ⌊10 ln² p⌋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorCurveConfig {
    pub p_grid: Vec<usize>,
    pub decays: Vec<f64>,
    #[serde(default = "half_n")]
    pub k_policy: KPolicy,
    /// Target `βᵀΣβ`; zero runs the null.
    #[serde(default = "one")]
    pub signal: f64,
    #[serde(default = "one")]
    pub sigma_sq: f64,
    #[serde(default = "gaussian")]
    pub design_entries: EntryDistribution,
    #[serde(default = "gaussian")]
    pub noise: EntryDistribution,
}

fn half_n() -> KPolicy {
    KPolicy::HalfN
}

fn one() -> f64 {
    1.0
}

/// Null law of the sketched statistic with `X` and `S` held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NullCalibrationConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub designs: Vec<EntryDistribution>,
    /// Population spectrum; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumKind>,
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `SKETCHF_SEED` when set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got '{v}'")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        match &self.experiment {
            Experiment::Table1(c) => {
                if c.cases.is_empty() || c.scalings.c1.is_empty() || c.scalings.c2.is_empty() {
                    return Err(Error::Config("table1 needs at least one case, c1 and c2".into()));
                }
                let bad = |v: &f64| !(v.is_finite() && *v >= 0.0);
                if c.scalings.c1.iter().any(bad) || c.scalings.c2.iter().any(|v| bad(v) || *v == 0.0) {
                    return Err(Error::Config("c1 must be nonnegative and c2 positive".into()));
                }
                for case in &c.cases {
                    SpectrumModel::new(case.spectrum.clone(), c.p).validate()?;
                    case.design_entries.validate()?;
                    case.k_policy.resolve(c.n, c.p)?;
                }
                c.noise.validate()?;
            }
            Experiment::SignalStability(c) => {
                check_grid(&c.p_grid)?;
                check_decays(&c.decays)?;
                for &p in &c.p_grid {
                    for &a in &c.decays {
                        example_k_formula(p, log_square_n(p), a)?;
                    }
                }
            }
            Experiment::ErrorCurve(c) => {
                check_grid(&c.p_grid)?;
                check_decays(&c.decays)?;
                if !(c.signal >= 0.0 && c.signal.is_finite() && c.sigma_sq > 0.0 && c.sigma_sq.is_finite()) {
                    return Err(Error::Config("signal must be nonnegative and sigma_sq positive".into()));
                }
                for &p in &c.p_grid {
                    c.k_policy.resolve(log_square_n(p), p)?;
                }
                c.design_entries.validate()?;
                c.noise.validate()?;
            }
            Experiment::NullCalibration(c) => {
                if c.designs.is_empty() {
                    return Err(Error::Config("null_calibration needs at least one design".into()));
                }
                if c.k < 1 || c.k >= c.n || c.k > c.p {
                    return Err(Error::Config(format!(
                        "need 1 <= k < n and k <= p, got n={}, p={}, k={}",
                        c.n, c.p, c.k
                    )));
                }
                if let Some(s) = &c.spectrum {
                    SpectrumModel::new(s.clone(), c.p).validate()?;
                }
                for d in &c.designs {
                    d.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Slow and fast decay at `(n, p) = (50, 500)`.
    pub fn table1_default() -> Self {
        Self {
            experiment: Experiment::Table1(Table1Config {
                n: 50,
                p: 500,
                cases: vec![
                    DecayCase {
                        label: "slow".into(),
                        spectrum: SpectrumKind::Logsquare,
                        design_entries: EntryDistribution::Gaussian,
                        k_policy: KPolicy::HalfN,
                    },
                    DecayCase {
                        label: "fast".into(),
                        spectrum: SpectrumKind::Fastmix,
                        design_entries: EntryDistribution::StudentT { df: 2.0 },
                        k_policy: KPolicy::LogP { multiplier: 2.0 },
                    },
                ],
                scalings: Scalings {
                    c1: vec![0.0, 1.0, 5.0],
                    c2: vec![50.0, 100.0, 300.0],
                },
                coefficients: CoefficientDist::BinomMix,
                noise: EntryDistribution::Gaussian,
            }),
            reps: 500,
            alpha: 0.05,
            master_seed: 20240601,
            workers: None,
        }
    }

    pub fn signal_stability_default() -> Self {
        Self {
            experiment: Experiment::SignalStability(StabilityConfig {
                p_grid: vec![100, 300, 1000, 2000, 5000, 10000],
                decays: vec![2.0, 4.0],
                doublings: 2,
            }),
            reps: 1000,
            alpha: 0.05,
            master_seed: 20240602,
            workers: None,
        }
    }

    pub fn error_curve_default() -> Self {
        Self {
            experiment: Experiment::ErrorCurve(ErrorCurveConfig {
                p_grid: vec![100, 300, 1000, 2000, 5000, 10000],
                decays: vec![2.0, 4.0],
                k_policy: KPolicy::HalfN,
                signal: 1.0,
                sigma_sq: 1.0,
                design_entries: EntryDistribution::Gaussian,
                noise: EntryDistribution::Gaussian,
            }),
            reps: 200,
            alpha: 0.05,
            master_seed: 20240603,
            workers: None,
        }
    }

    pub fn null_calibration_default() -> Self {
        Self {
            experiment: Experiment::NullCalibration(NullCalibrationConfig {
                n: 100,
                p: 300,
                k: 40,
                designs: vec![EntryDistribution::Gaussian, EntryDistribution::StudentT { df: 5.0 }],
                spectrum: None,
            }),
            reps: 2000,
            alpha: 0.05,
            master_seed: 20240604,
            workers: None,
        }
    }
}

/// `⌊10 ln² p⌋`.
pub fn log_square_n(p: usize) -> usize {
    (10.0 * (p as f64).ln().powi(2)).floor() as usize
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|&p| p < 3) {
        return Err(Error::Config("p grid must be nonempty with every p >= 3".into()));
    }
    Ok(())
}

fn check_decays(decays: &[f64]) -> Result<()> {
    if decays.is_empty() || decays.iter().any(|a| !(*a > 1.0 && a.is_finite())) {
        return Err(Error::Config("decay exponents must exceed 1".into()));
    }
    Ok(())
}

/// JSON schema of [`SimulationConfig`].
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(SimulationConfig)).expect("schema serialises")
}
