//! Intrinsic dimension of a `(β, Σ)` pair and the sketch sizes it suggests.
//!
//! Everything works in the eigenbasis: `beta_rot = Uᵀβ` paired with the
//! descending spectrum. Logarithms are natural.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicDimReport {
    pub r: usize,
    pub eta: f64,
    pub cond1_lhs: f64,
    pub cond2_lhs: f64,
    pub signal: f64,
    /// `sqrt(r)/n`, present once a sample size is attached.
    pub radius_sq: Option<f64>,
    pub holds: bool,
}

impl IntrinsicDimReport {
    pub fn with_n(mut self, n: usize) -> Self {
        self.radius_sq = Some(minimax_radius(self.r, n));
        self
    }
}

/// Prefix sums of `β̃²` and suffix sums of `λ` and `β̃²λ`, shared by the
/// single-`r` evaluation and the scan so both agree bit for bit.
struct Scan<'a> {
    spectrum: &'a [f64],
    head_b2: Vec<f64>,
    tail_b2: Vec<f64>,
    tail_l: Vec<f64>,
    tail_b2l: Vec<f64>,
    signal: f64,
}

impl<'a> Scan<'a> {
    fn new(beta_rot: &DVector<f64>, spectrum: &'a [f64]) -> Result<Self> {
        let p = spectrum.len();
        if beta_rot.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "beta has length {} but spectrum has length {p}",
                beta_rot.len()
            )));
        }
        let b2: Vec<f64> = beta_rot.iter().map(|b| b * b).collect();
        let mut head_b2 = vec![0.0; p + 1];
        for i in 0..p {
            head_b2[i + 1] = head_b2[i] + b2[i];
        }
        let mut tail_b2 = vec![0.0; p + 1];
        let mut tail_l = vec![0.0; p + 1];
        let mut tail_b2l = vec![0.0; p + 1];
        for i in (0..p).rev() {
            tail_b2[i] = tail_b2[i + 1] + b2[i];
            tail_l[i] = tail_l[i + 1] + spectrum[i];
            tail_b2l[i] = tail_b2l[i + 1] + b2[i] * spectrum[i];
        }
        let signal = tail_b2l[0];
        if !(signal > 0.0) {
            return Err(Error::DegenerateInput("signal βᵀΣβ is zero".into()));
        }
        Ok(Self {
            spectrum,
            head_b2,
            tail_b2,
            tail_l,
            tail_b2l,
            signal,
        })
    }

    fn p(&self) -> usize {
        self.spectrum.len()
    }

    fn at(&self, r: usize, eta: f64) -> IntrinsicDimReport {
        let p = self.p();
        let head_avg = self.head_b2[r] / r as f64;
        let tail_avg = self.tail_b2[r] / (p - r) as f64;
        let cond1 = head_avg * self.tail_l[r] + self.tail_b2l[r];
        let cond2 = (head_avg + tail_avg) * r as f64 * self.spectrum[r];
        let bound = eta * self.signal;
        IntrinsicDimReport {
            r,
            eta,
            cond1_lhs: cond1,
            cond2_lhs: cond2,
            signal: self.signal,
            radius_sq: None,
            holds: cond1 <= bound && cond2 <= bound,
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

/// Default tolerance `1/ln p`.
pub fn default_eta(p: usize) -> f64 {
    1.0 / (p as f64).ln()
}

/// Both intrinsic-dimension inequalities at a given `r`.
pub fn intrinsic_conditions(
    beta_rot: &DVector<f64>,
    spectrum: &[f64],
    r: usize,
    eta: f64,
) -> Result<IntrinsicDimReport> {
    check_eta(eta)?;
    let p = spectrum.len();
    if r < 1 || r >= p {
        return Err(Error::Domain(format!("r must satisfy 1 <= r < p, got r={r}, p={p}")));
    }
    Ok(Scan::new(beta_rot, spectrum)?.at(r, eta))
}

/// Smallest `r` in `1..p` whose conditions hold; `None` when no `r` does.
pub fn min_intrinsic_dim(beta_rot: &DVector<f64>, spectrum: &[f64], eta: f64) -> Result<Option<usize>> {
    check_eta(eta)?;
    let scan = Scan::new(beta_rot, spectrum)?;
    Ok((1..scan.p()).find(|&r| scan.at(r, eta).holds))
}

/// `min(3r, ⌊n/2⌋)` with a hint, `⌊n/2⌋` without; never below one.
pub fn recommend_k(n: usize, r_hint: Option<usize>) -> usize {
    let half = n / 2;
    let k = match r_hint {
        Some(r) => (3 * r).min(half),
        None => half,
    };
    k.max(1)
}

/// `⌊min(3 (ln p)^{1/(α-1)}, n/2)⌋`.
pub fn example_k_formula(p: usize, n: usize, alpha_decay: f64) -> Result<usize> {
    if !(alpha_decay > 1.0) || !alpha_decay.is_finite() {
        return Err(Error::Domain(format!("decay exponent must exceed 1, got {alpha_decay}")));
    }
    if p < 2 {
        return Err(Error::Domain(format!("p must be at least 2, got {p}")));
    }
    let rate = 3.0 * (p as f64).ln().powf(1.0 / (alpha_decay - 1.0));
    let k = rate.min(n as f64 / 2.0).floor();
    if k < 1.0 {
        return Err(Error::Domain(format!("formula gives k = 0 for p={p}, n={n}, alpha={alpha_decay}")));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    Polynomial { alpha: f64 },
    Exponential { gamma: f64 },
    Block { m: usize },
    /// Coefficients with `β̃_i sqrt(i)` bounded above and below.
    StructuredCoef,
}

/// Predicted intrinsic-dimension scale, without constants.
pub fn example_rate(kind: RateKind, p: usize) -> Result<f64> {
    let lp = (p as f64).ln();
    match kind {
        RateKind::Polynomial { alpha } => {
            if !(alpha > 1.0) || p < 2 {
                return Err(Error::Config(format!("polynomial rate needs alpha > 1 and p >= 2 (alpha={alpha}, p={p})")));
            }
            Ok(lp.powf(1.0 / (alpha - 1.0)))
        }
        RateKind::Exponential { gamma } => {
            if !(gamma > 0.0) || lp <= 1.0 {
                return Err(Error::Config(format!("exponential rate needs gamma > 0 and p > e (gamma={gamma}, p={p})")));
            }
            Ok(lp.ln().powf(1.0 / gamma))
        }
        RateKind::Block { m } => {
            if m == 0 {
                return Err(Error::Config("block rate needs m >= 1".into()));
            }
            Ok(m as f64)
        }
        RateKind::StructuredCoef => {
            if p < 2 {
                return Err(Error::Config("structured rate needs p >= 2".into()));
            }
            Ok(lp.powi(3))
        }
    }
}

/// `ε_n² = sqrt(r)/n`.
pub fn minimax_radius(r: usize, n: usize) -> f64 {
    (r as f64).sqrt() / n as f64
}
