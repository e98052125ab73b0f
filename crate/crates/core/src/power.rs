//! Retained signal after sketching and the power calculus built on it.
//!
//! All power curves use the upper normal quantile `z_alpha` and return
//! exactly `alpha` at zero signal.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{signal_rotated, CovFactor, SketchMatrix};
use crate::numkit::{f_quantile, noncentral_f_moments, std_normal_cdf, std_normal_quantile};

/// Condition bound applied to `SᵀΣS`.
pub const MAX_SKETCH_GRAM_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub delta_sq: f64,
    pub nu_sq: f64,
    pub signal: f64,
    pub sigma_sq: f64,
    pub n: usize,
    pub k: usize,
    pub p: usize,
}

impl PowerProfile {
    pub fn compute(beta: &DVector<f64>, cov: &CovFactor, s: &SketchMatrix, sigma_sq: f64, n: usize) -> Result<Self> {
        if !(sigma_sq > 0.0) {
            return Err(Error::Domain(format!("sigma_sq must be positive, got {sigma_sq}")));
        }
        let delta_sq = delta_k_sq(beta, cov, s)?;
        let signal = cov.signal(beta);
        Ok(Self {
            delta_sq,
            nu_sq: sigma_sq + signal - delta_sq,
            signal,
            sigma_sq,
            n,
            k: s.k(),
            p: cov.p(),
        })
    }

    pub fn rho(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Asymptotic power of the sketched test at this instance.
    pub fn power_sketched(&self, alpha: f64) -> Result<f64> {
        power_sketched(self.n, self.k, self.delta_sq / self.sigma_sq, alpha)
    }
}

fn z_upper(alpha: f64) -> Result<f64> {
    std_normal_quantile(1.0 - alpha).map_err(|_| Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

/// `Δ_k²` from the rotated coefficients, spectrum and rotated sketch `UᵀS`.
/// Returns one value per entry of `ks`, each using the leading `k` columns.
pub fn delta_k_sq_nested(
    beta_rot: &DVector<f64>,
    spectrum: &[f64],
    s_rot: &DMatrix<f64>,
    ks: &[usize],
) -> Result<Vec<f64>> {
    let p = spectrum.len();
    if beta_rot.len() != p || s_rot.nrows() != p {
        return Err(Error::DimensionMismatch(format!(
            "spectrum length {p}, beta length {}, sketch rows {}",
            beta_rot.len(),
            s_rot.nrows()
        )));
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    if kmax == 0 || kmax > s_rot.ncols() {
        return Err(Error::Domain(format!(
            "requested sketch widths {ks:?} exceed the {} available columns",
            s_rot.ncols()
        )));
    }
    if kmax > p {
        return Err(Error::SingularSketch(f64::INFINITY));
    }
    let roots: Vec<f64> = spectrum.iter().map(|l| l.sqrt()).collect();
    let mut m = s_rot.columns(0, kmax).into_owned();
    for (i, r) in roots.iter().enumerate() {
        m.row_mut(i).scale_mut(*r);
    }
    let v = DVector::from_iterator(p, beta_rot.iter().zip(&roots).map(|(b, r)| b * r));
    let signal = v.norm_squared();

    let qr = m.qr();
    let r = qr.r();
    let mut qtv = v;
    qr.q_tr_mul(&mut qtv);

    ks.iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::Domain("sketch width must be at least 1".into()));
            }
            let c = linalg::cond(&r.view((0, 0), (k, k)).into_owned());
            if !(c * c <= MAX_SKETCH_GRAM_COND) {
                return Err(Error::SingularSketch(c * c));
            }
            let d = qtv.rows(0, k).norm_squared();
            Ok(d.clamp(0.0, signal))
        })
        .collect()
}

/// `Δ_k² = βᵀΣS(SᵀΣS)⁻¹SᵀΣβ`, evaluated as the squared norm of the
/// projection of `Σ^{1/2}β` onto the range of `Σ^{1/2}S`.
pub fn delta_k_sq(beta: &DVector<f64>, cov: &CovFactor, s: &SketchMatrix) -> Result<f64> {
    if beta.len() != cov.p() || s.p() != cov.p() {
        return Err(Error::DimensionMismatch(format!(
            "p = {}, beta length {}, sketch rows {}",
            cov.p(),
            beta.len(),
            s.p()
        )));
    }
    let bt = cov.rotate(beta);
    let st = cov.rotate_matrix(&s.entries);
    Ok(delta_k_sq_nested(&bt, cov.spectrum(), &st, &[s.k()])?[0])
}

/// Asymptotic power of the classical test with `δ = p/n`.
pub fn power_classical(n: usize, p: usize, signal_over_sigma_sq: f64, alpha: f64) -> Result<f64> {
    if p == 0 || p >= n {
        return Err(Error::Domain(format!("classical power needs 0 < p < n, got p={p}, n={n}")));
    }
    check_nonneg("signal", signal_over_sigma_sq)?;
    let z = z_upper(alpha)?;
    let (nf, delta) = (n as f64, p as f64 / n as f64);
    Ok(std_normal_cdf(-z + ((1.0 - delta) * nf / (2.0 * delta)).sqrt() * signal_over_sigma_sq))
}

/// Asymptotic power of the sketched test with `ρ = k/n`.
pub fn power_sketched(n: usize, k: usize, delta_sq_over_sigma_sq: f64, alpha: f64) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("sketched power needs 0 < k < n, got k={k}, n={n}")));
    }
    check_nonneg("retained signal", delta_sq_over_sigma_sq)?;
    let z = z_upper(alpha)?;
    let (nf, rho) = (n as f64, k as f64 / n as f64);
    Ok(std_normal_cdf(-z + ((1.0 - rho) * nf / (2.0 * rho)).sqrt() * delta_sq_over_sigma_sq))
}

/// Power of the sketched test when the full signal `βᵀΣβ` is retained.
pub fn power_sketched_intrinsic(n: usize, k: usize, signal_over_sigma_sq: f64, alpha: f64) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("sketched power needs 0 < k < n, got k={k}, n={n}")));
    }
    check_nonneg("signal", signal_over_sigma_sq)?;
    let z = z_upper(alpha)?;
    let (nf, kf) = (n as f64, k as f64);
    let shift = nf.sqrt() * signal_over_sigma_sq * ((1.0 - kf / nf) / (2.0 * kf / nf)).sqrt();
    Ok(std_normal_cdf(-z + shift))
}

fn trace_pow(spectrum: &[f64], e: i32) -> f64 {
    spectrum.iter().map(|l| l.powi(e)).sum()
}

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.is_empty() || spectrum.iter().all(|&l| l == 0.0) {
        return Err(Error::DegenerateInput("spectrum is identically zero".into()));
    }
    if spectrum.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Domain("spectrum must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Asymptotic power of the Zhong–Chen U-statistic test.
pub fn power_zc(n: usize, spectrum: &[f64], sigma_beta_norm_sq: f64, sigma_sq: f64, alpha: f64) -> Result<f64> {
    check_spectrum(spectrum)?;
    check_nonneg("‖Σβ‖²", sigma_beta_norm_sq)?;
    if !(sigma_sq > 0.0) {
        return Err(Error::Domain(format!("sigma_sq must be positive, got {sigma_sq}")));
    }
    let z = z_upper(alpha)?;
    let shift = n as f64 * sigma_beta_norm_sq / (sigma_sq * (2.0 * trace_pow(spectrum, 2)).sqrt());
    Ok(std_normal_cdf(-z + shift))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(())
}

/// Asymptotic relative efficiency of the ZC test against the sketched
/// test; values below one favour the sketched test.
pub fn are(n: usize, rho: f64, spectrum: &[f64], delta_sq: f64, sigma_beta_norm_sq: f64) -> Result<f64> {
    check_rho(rho)?;
    check_spectrum(spectrum)?;
    if !(delta_sq > 0.0) {
        return Err(Error::DegenerateInput("retained signal is zero".into()));
    }
    check_nonneg("‖Σβ‖²", sigma_beta_norm_sq)?;
    let zc = (n as f64).sqrt() / trace_pow(spectrum, 2).sqrt();
    let sk = ((1.0 - rho) / rho).sqrt() * delta_sq / sigma_beta_norm_sq;
    Ok(zc / sk)
}

/// High-probability upper bound `4/sqrt(ρ(1-ρ)) · trΣ/sqrt(trΣ²) / sqrt(n)`.
pub fn are_upper_bound(n: usize, rho: f64, spectrum: &[f64]) -> Result<f64> {
    check_rho(rho)?;
    check_spectrum(spectrum)?;
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let ratio = trace_pow(spectrum, 1) / trace_pow(spectrum, 2).sqrt();
    Ok(4.0 / (rho * (1.0 - rho)).sqrt() * ratio / (n as f64).sqrt())
}

/// `tr(Σ⁴)/tr²(Σ²)`.
pub fn zc_condition_ratio(spectrum: &[f64]) -> Result<f64> {
    check_spectrum(spectrum)?;
    // Normalise first so large or tiny spectra do not overflow the fourth power.
    let top = spectrum.iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = spectrum.iter().map(|l| l / top).collect();
    Ok(trace_pow(&scaled, 4) / trace_pow(&scaled, 2).powi(2))
}

/// Chebyshev bound on the Type II error of the sketched test given the
/// noncentrality `λ`; the trivial bound 1 when `E[F] ≤ q`.
pub fn type2_chebyshev_bound(n: usize, k: usize, lambda_ncp: f64, alpha: f64) -> Result<f64> {
    if k == 0 || k >= n || n - k <= 4 {
        return Err(Error::Domain(format!("Chebyshev bound needs k >= 1 and n - k > 4, got n={n}, k={k}")));
    }
    check_nonneg("noncentrality", lambda_ncp)?;
    let (d1, d2) = (k as f64, (n - k) as f64);
    let q = f_quantile(alpha, d1, d2)?;
    let (mean, var) = noncentral_f_moments(d1, d2, lambda_ncp)?;
    if mean <= q {
        return Ok(1.0);
    }
    Ok((var / (q - mean).powi(2)).clamp(0.0, 1.0))
}

/// `βᵀΣβ` from rotated coordinates; re-exported for callers working in the
/// eigenbasis.
pub fn signal_from_rotated(beta_rot: &DVector<f64>, spectrum: &[f64]) -> f64 {
    signal_rotated(beta_rot, spectrum)
}
