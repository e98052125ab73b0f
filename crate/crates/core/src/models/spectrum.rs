use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Eigenvalue families, indexed by `j = 1..=p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum SpectrumKind {
    /// Arbitrary nonnegative values; sorted on construction.
    Explicit { values: Vec<f64> },
    /// `j^{-alpha}`, `alpha > 1`.
    Polynomial { alpha: f64 },
    /// `exp(-j^gamma)`, `gamma > 0`.
    Exponential { gamma: f64 },
    /// `j^{-1/2}`.
    Invsqrt,
    /// `m` compound-symmetric blocks of size `d` with correlation `rho`.
    Block { m: usize, d: usize, rho: f64 },
    /// `1 / ln²(j + 1)`.
    Logsquare,
    /// `j^{-2/3} / ln(j + 1)`.
    Fastmix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SpectrumModel {
    #[serde(flatten)]
    pub kind: SpectrumKind,
    pub p: usize,
}

impl SpectrumModel {
    pub fn new(kind: SpectrumKind, p: usize) -> Self {
        Self { kind, p }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let p = values.len();
        Self::new(SpectrumKind::Explicit { values }, p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return config("spectrum dimension p must be at least 1");
        }
        match &self.kind {
            SpectrumKind::Explicit { values } => {
                if values.len() != self.p {
                    return config(format!(
                        "explicit spectrum has {} values but p = {}",
                        values.len(),
                        self.p
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return config("explicit spectrum must be finite and nonnegative");
                }
            }
            SpectrumKind::Polynomial { alpha } => {
                if !(*alpha > 1.0 && alpha.is_finite()) {
                    return config(format!("polynomial decay needs alpha > 1, got {alpha}"));
                }
            }
            SpectrumKind::Exponential { gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return config(format!("exponential decay needs gamma > 0, got {gamma}"));
                }
            }
            SpectrumKind::Block { m, d, rho } => {
                if *m == 0 || *d == 0 || m * d != self.p {
                    return config(format!("block spectrum needs p = m*d (m={m}, d={d}, p={})", self.p));
                }
                if !(*rho >= 0.0 && *rho < 1.0) {
                    return config(format!("block correlation must lie in [0, 1), got {rho}"));
                }
            }
            SpectrumKind::Invsqrt | SpectrumKind::Logsquare | SpectrumKind::Fastmix => {}
        }
        Ok(())
    }
}

/// Descending, nonnegative eigenvalues of the model.
pub fn build_spectrum(model: &SpectrumModel) -> Result<Vec<f64>> {
    model.validate()?;
    let p = model.p;
    let idx = (1..=p).map(|j| j as f64);
    let mut out: Vec<f64> = match &model.kind {
        SpectrumKind::Explicit { values } => values.clone(),
        SpectrumKind::Polynomial { alpha } => idx.map(|j| j.powf(-alpha)).collect(),
        SpectrumKind::Exponential { gamma } => idx.map(|j| (-j.powf(*gamma)).exp()).collect(),
        SpectrumKind::Invsqrt => idx.map(|j| j.powf(-0.5)).collect(),
        SpectrumKind::Block { m, d, rho } => {
            let big = (1.0 - rho) + rho * *d as f64;
            let mut v = vec![big; *m];
            v.extend(std::iter::repeat_n(1.0 - rho, p - m));
            v
        }
        SpectrumKind::Logsquare => idx.map(|j| (j + 1.0).ln().powi(-2)).collect(),
        SpectrumKind::Fastmix => idx.map(|j| j.powf(-2.0 / 3.0) / (j + 1.0).ln()).collect(),
    };
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}
