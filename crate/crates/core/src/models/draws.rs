use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::cov::{Basis, CoefficientVector, CovFactor};
use super::rng::{rng_from_seed, Rng};
use crate::error::{Error, Result};

/// Distribution of i.i.d. design or noise entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum EntryDistribution {
    Gaussian,
    /// Raw Student-t; not standardised.
    StudentT { df: f64 },
    /// `(e^Z - e^{1/2}) / sqrt((e - 1) e)`: mean zero, unit variance.
    LognormalStandardized,
}

impl EntryDistribution {
    pub fn validate(&self) -> Result<()> {
        if let EntryDistribution::StudentT { df } = self {
            if !(*df > 0.0 && df.is_finite()) {
                return Err(Error::Config(format!("student_t needs df > 0, got {df}")));
            }
        }
        Ok(())
    }

    pub fn has_unit_variance(&self) -> bool {
        !matches!(self, EntryDistribution::StudentT { .. })
    }

    pub fn infinite_variance(&self) -> bool {
        matches!(self, EntryDistribution::StudentT { df } if *df <= 2.0)
    }

    /// Returns a sampler; panics are avoided by validating first.
    pub fn sampler(&self) -> Result<EntrySampler> {
        self.validate()?;
        Ok(match *self {
            EntryDistribution::Gaussian => EntrySampler::Gaussian,
            EntryDistribution::StudentT { df } => EntrySampler::StudentT(
                StudentT::new(df).map_err(|e| Error::Config(format!("student_t: {e}")))?,
            ),
            EntryDistribution::LognormalStandardized => EntrySampler::Lognormal {
                shift: 0.5f64.exp(),
                scale: ((std::f64::consts::E - 1.0) * std::f64::consts::E).sqrt(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum EntrySampler {
    Gaussian,
    StudentT(StudentT<f64>),
    Lognormal { shift: f64, scale: f64 },
}

impl EntrySampler {
    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            EntrySampler::Gaussian => rng.sample(StandardNormal),
            EntrySampler::StudentT(t) => t.sample(rng),
            EntrySampler::Lognormal { shift, scale } => {
                let z: f64 = rng.sample(StandardNormal);
                (z.exp() - shift) / scale
            }
        }
    }
}

/// Entry law of the coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum CoefficientDist {
    Zeros,
    Gaussian,
    /// `Binomial(3, 0.3) + 0.3 N(0, 1)`.
    BinomMix,
}

impl FromStr for CoefficientDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(Self::Zeros),
            "gaussian" => Ok(Self::Gaussian),
            "binom_mix" => Ok(Self::BinomMix),
            other => Err(Error::Config(format!("unknown coefficient distribution '{other}'"))),
        }
    }
}

impl fmt::Display for CoefficientDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zeros => "zeros",
            Self::Gaussian => "gaussian",
            Self::BinomMix => "binom_mix",
        })
    }
}

/// Gaussian `p×k` sketch together with the seed that produced it.
///
/// Entries are filled column by column from one stream, so the first `k`
/// columns of a wider sketch with the same seed equal the narrower sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchMatrix {
    pub entries: DMatrix<f64>,
    pub seed: u64,
}

impl SketchMatrix {
    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn k(&self) -> usize {
        self.entries.ncols()
    }

    /// First `k` columns (a nested sketch).
    pub fn leading(&self, k: usize) -> SketchMatrix {
        SketchMatrix {
            entries: self.entries.columns(0, k.min(self.k())).into_owned(),
            seed: self.seed,
        }
    }
}

pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

pub fn sample_entries(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
    dist: &EntryDistribution,
) -> Result<DMatrix<f64>> {
    let s = dist.sampler()?;
    Ok(DMatrix::from_fn(rows, cols, |_, _| s.sample(rng)))
}

pub fn sample_orthobasis(rng: &mut Rng, p: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, p, p);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed orthogonal `p×p` matrix.
pub fn random_orthobasis(p: usize, seed: u64) -> DMatrix<f64> {
    sample_orthobasis(&mut rng_from_seed(seed), p)
}

/// Covariance with a Haar basis and the given descending spectrum.
pub fn random_cov(spectrum: Vec<f64>, seed: u64) -> Result<CovFactor> {
    let diag = CovFactor::diagonal(spectrum)?;
    let u = random_orthobasis(diag.p(), seed);
    Ok(CovFactor::from_parts_unchecked(Basis::Dense(u), diag.spectrum().to_vec()))
}

pub fn sample_coefficients(rng: &mut Rng, p: usize, dist: CoefficientDist) -> DVector<f64> {
    match dist {
        CoefficientDist::Zeros => DVector::zeros(p),
        CoefficientDist::Gaussian => gaussian_vector(rng, p),
        CoefficientDist::BinomMix => DVector::from_fn(p, |_, _| {
            let trials = (0..3).filter(|_| rng.random::<f64>() < 0.3).count() as f64;
            let z: f64 = rng.sample(StandardNormal);
            trials + 0.3 * z
        }),
    }
}

pub fn draw_coefficients(p: usize, dist: CoefficientDist, seed: u64) -> Result<CoefficientVector> {
    if p == 0 {
        return Err(Error::Config("p must be at least 1".into()));
    }
    Ok(CoefficientVector::new(sample_coefficients(&mut rng_from_seed(seed), p, dist)))
}

/// Rescales so that `‖β'‖₂ = c1` and `‖Σ'‖_F = c2`.
pub fn rescale_pair(
    beta: &DVector<f64>,
    cov: &CovFactor,
    c1: f64,
    c2: f64,
) -> Result<(DVector<f64>, CovFactor)> {
    if !(c1 >= 0.0 && c2 >= 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(Error::Config(format!("scaling targets must be nonnegative, got ({c1}, {c2})")));
    }
    let beta2 = if c1 == 0.0 {
        DVector::zeros(beta.len())
    } else {
        let nb = beta.norm();
        if nb == 0.0 {
            return Err(Error::DegenerateInput("cannot rescale a zero coefficient vector".into()));
        }
        beta * (c1 / nb)
    };
    let fro = cov.frobenius();
    let spectrum: Vec<f64> = if c2 == 0.0 {
        vec![0.0; cov.p()]
    } else {
        if fro == 0.0 {
            return Err(Error::DegenerateInput("cannot rescale a zero spectrum".into()));
        }
        cov.spectrum().iter().map(|l| l * (c2 / fro)).collect()
    };
    Ok((beta2, cov.with_spectrum(spectrum)?))
}

/// `n×p` design with rows `Σ^{1/2} z_i`.
pub fn draw_design(n: usize, cov: &CovFactor, dist: &EntryDistribution, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let z = sample_entries(&mut rng_from_seed(seed), n, cov.p(), dist)?;
    Ok(cov.right_mul_sqrt(&z))
}

/// `y = Xβ + σ z`.
pub fn draw_response(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma: f64,
    noise: &EntryDistribution,
    seed: u64,
) -> Result<DVector<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns but beta has length {}",
            x.ncols(),
            beta.len()
        )));
    }
    let z = sample_entries(&mut rng_from_seed(seed), x.nrows(), 1, noise)?;
    let z = DVector::from_column_slice(z.as_slice());
    Ok(x * beta + z * sigma)
}

pub fn draw_sketch(p: usize, k: usize, seed: u64) -> Result<SketchMatrix> {
    if k < 1 {
        return Err(Error::Config("sketch dimension k must be at least 1".into()));
    }
    Ok(SketchMatrix {
        entries: gaussian_matrix(&mut rng_from_seed(seed), p, k),
        seed,
    })
}
