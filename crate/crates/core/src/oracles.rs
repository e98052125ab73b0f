//! Numerical verifiers for the lemmas behind the signal-retention argument.
//!
//! Deterministic pieces (`xi_star`, `l1_l2_bound`, `eigen_lifting`,
//! `matrix_norm_ineq_check`) evaluate the quantities exactly; the
//! `*_check` functions estimate a failure frequency by Monte Carlo and
//! compare it with the stated bound plus three binomial standard errors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::rng::{stream, substream, Rng};
use crate::models::{gaussian_matrix, gaussian_vector, CovFactor, SketchMatrix};

/// Conditioning cutoff for the small Gram matrices handled here.
const MAX_GRAM_COND: f64 = 1e12;
/// Replications per independent substream in the Monte Carlo checkers.
const CHUNK: usize = 1000;

/// Rotated sketch and coefficients split at `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSketch {
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub beta1: DVector<f64>,
    pub beta2: DVector<f64>,
    pub lam_tail: Vec<f64>,
}

impl SplitSketch {
    pub fn new(beta: &DVector<f64>, cov: &CovFactor, r: usize, s: &SketchMatrix) -> Result<Self> {
        let p = cov.p();
        if beta.len() != p || s.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "p = {p}, beta length {}, sketch rows {}",
                beta.len(),
                s.p()
            )));
        }
        if r < 1 || r >= p {
            return Err(Error::Domain(format!("split needs 1 <= r < p, got r={r}, p={p}")));
        }
        let bt = cov.rotate(beta);
        let st = cov.rotate_matrix(&s.entries);
        Ok(Self::from_rotated(&bt, &st, cov.spectrum(), r))
    }

    /// Splits already rotated quantities; `r` must be in `1..p`.
    pub fn from_rotated(beta_rot: &DVector<f64>, s_rot: &DMatrix<f64>, spectrum: &[f64], r: usize) -> Self {
        let p = spectrum.len();
        Self {
            s1: s_rot.rows(0, r).into_owned(),
            s2: s_rot.rows(r, p - r).into_owned(),
            beta1: beta_rot.rows(0, r).into_owned(),
            beta2: beta_rot.rows(r, p - r).into_owned(),
            lam_tail: spectrum[r..].to_vec(),
        }
    }

    pub fn r(&self) -> usize {
        self.s1.nrows()
    }

    pub fn k(&self) -> usize {
        self.s1.ncols()
    }

    fn tail_roots(&self) -> Vec<f64> {
        self.lam_tail.iter().map(|l| l.sqrt()).collect()
    }

    /// `(β - Sξ)ᵀ Σ_{p-r} (β - Sξ)`.
    pub fn residual(&self, xi: &DVector<f64>) -> f64 {
        let d = &self.beta2 - &self.s2 * xi;
        d.iter().zip(&self.lam_tail).map(|(v, l)| l * v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub l1: f64,
    pub l2: f64,
    pub residual: f64,
    pub holds: bool,
}

/// Minimiser of the tail residual subject to matching `β` on the leading
/// `r` eigendirections.
pub fn xi_star(beta: &DVector<f64>, cov: &CovFactor, r: usize, s: &SketchMatrix) -> Result<DVector<f64>> {
    xi_star_split(&SplitSketch::new(beta, cov, r, s)?)
}

/// Same as [`xi_star`] on a pre-split instance. Solved by a particular
/// solution of the constraint plus a least-squares step in its null space.
pub fn xi_star_split(split: &SplitSketch) -> Result<DVector<f64>> {
    let (r, k) = (split.r(), split.k());
    if k < r {
        return Err(Error::InfeasibleConstraint(format!("k = {k} is smaller than r = {r}")));
    }
    // S̃₁ᵀ = Q [R; 0], so ξ₀ = Q₁ R⁻ᵀ β̃₁ solves S̃₁ ξ = β̃₁ and Q₂ spans the null space.
    let s1t = split.s1.transpose();
    let q = linalg::full_q(&s1t);
    let q1 = q.columns(0, r).into_owned();
    let rmat = q1.tr_mul(&s1t);
    let c = linalg::cond(&rmat);
    if !(c * c <= MAX_GRAM_COND) {
        return Err(Error::InfeasibleConstraint(format!(
            "leading block of the rotated sketch is rank deficient (condition {c:.3e})"
        )));
    }
    let y = rmat
        .transpose()
        .solve_lower_triangular(&split.beta1)
        .ok_or_else(|| Error::InfeasibleConstraint("triangular solve failed".into()))?;
    let xi0 = &q1 * y;
    if k == r {
        return Ok(xi0);
    }

    let null = q.columns(r, k - r).into_owned();
    let m = split.lam_tail.len();
    if m < k - r {
        return Err(Error::SingularSketch(f64::INFINITY));
    }
    let roots = split.tail_roots();
    let mut a = &split.s2 * &null;
    let mut rhs = &split.beta2 - &split.s2 * &xi0;
    for (i, w) in roots.iter().enumerate() {
        a.row_mut(i).scale_mut(*w);
        rhs[i] *= w;
    }
    let fit = linalg::lstsq(&a, &rhs, MAX_GRAM_COND.sqrt()).map_err(|c| Error::SingularSketch(c * c))?;
    Ok(xi0 + null * fit.coef)
}

fn sym_kappa(m: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    let ev = linalg::sym_eigenvalues_desc(m);
    let (hi, lo) = (ev[0], *ev.last().unwrap());
    if !(lo > 0.0) || !(hi / lo <= MAX_GRAM_COND) {
        return Err(Error::SingularSketch(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    Ok((hi, lo, hi / lo))
}

/// Certificate comparing the optimal tail residual with `2 L1 + 2 L2`.
pub fn l1_l2_bound(split: &SplitSketch) -> Result<BoundCertificate> {
    let b1 = &split.s1 * split.s1.transpose();
    let mut weighted = split.s2.clone();
    for (i, l) in split.lam_tail.iter().enumerate() {
        weighted.row_mut(i).scale_mut(*l);
    }
    let a2 = split.s2.tr_mul(&weighted);
    let (_, b1_min, kappa_b1) = sym_kappa(&b1)?;
    let (a2_max, _, kappa_a2) = sym_kappa(&a2)?;

    let l1 = a2_max / b1_min * split.beta1.norm_squared();
    let tail_signal: f64 = split.beta2.iter().zip(&split.lam_tail).map(|(b, l)| l * b * b).sum();
    let l2 = (1.0 + kappa_a2 * kappa_b1) * tail_signal;

    let xi = xi_star_split(split)?;
    let residual = split.residual(&xi);
    let holds = residual <= 2.0 * l1 + 2.0 * l2 + 1e-8 * (l1 + l2 + 1.0);
    Ok(BoundCertificate { l1, l2, residual, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedTail {
    /// `λ⁺_{r+1}, …, λ⁺_p`.
    pub lifted: Vec<f64>,
    /// `Σ λ⁺_i / λ⁺_{r+1}`; absent when `λ_{r+1} = 0`.
    pub ratio: Option<f64>,
    /// `(b/C₁) r`.
    pub target: f64,
}

impl LiftedTail {
    /// Whether the lifted tail reaches the target ratio. Algebra shows this
    /// needs `Σ_{i>r} λ_i ≥ (b r / C₁)² λ_{r+1} / (p - r)`, so it can fail
    /// when `p - r` is small relative to `r`.
    pub fn meets_target(&self) -> bool {
        self.ratio.is_none_or(|q| q >= self.target * (1.0 - 1e-12))
    }
}

/// Lifts the tail eigenvalues by `(b/C₁) r λ_{r+1} / (p - r)`.
pub fn eigen_lifting(spectrum: &[f64], r: usize, b: f64, c1_const: f64) -> Result<LiftedTail> {
    let p = spectrum.len();
    if r >= p {
        return Err(Error::Domain(format!("eigen lifting needs r < p, got r={r}, p={p}")));
    }
    if !(b > 0.0 && c1_const > 0.0) {
        return Err(Error::Domain(format!("constants must be positive, got b={b}, C1={c1_const}")));
    }
    let c = b / c1_const;
    let lead = spectrum[r];
    let shift = c * r as f64 * lead / (p - r) as f64;
    let lifted: Vec<f64> = spectrum[r..].iter().map(|l| l + shift).collect();
    let ratio = (lifted[0] > 0.0).then(|| lifted.iter().sum::<f64>() / lifted[0]);
    Ok(LiftedTail {
        lifted,
        ratio,
        target: c * r as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutcome {
    pub frequency: f64,
    pub bound: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl McOutcome {
    fn new(hits: usize, reps: usize, bound: f64) -> Self {
        let bound = bound.clamp(0.0, 1.0);
        let stderr = (bound * (1.0 - bound) / reps as f64).sqrt();
        let frequency = hits as f64 / reps as f64;
        Self {
            frequency,
            bound,
            stderr,
            pass: frequency <= bound + 3.0 * stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedOutcome {
    pub upper: McOutcome,
    pub lower: McOutcome,
    pub pass: bool,
}

impl TwoSidedOutcome {
    fn new(upper: McOutcome, lower: McOutcome) -> Self {
        let pass = upper.pass && lower.pass;
        Self { upper, lower, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFrequencies {
    /// Fraction of draws with `κ(S̃₂ᵀΛ_{p-r}S̃₂) ≤ 4`.
    pub tail_kappa_le_4: f64,
    /// Fraction of draws with `κ(S̃₁S̃₁ᵀ) ≤ C₂`.
    pub head_kappa_le_c2: f64,
    pub reps: usize,
}

/// Runs `body` on `reps` replications split into fixed chunks, each with
/// its own substream, and sums the per-replication tallies in chunk order.
fn tally<const N: usize, F>(reps: usize, seed: u64, body: F) -> [usize; N]
where
    F: Fn(&mut Rng) -> [bool; N] + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let per_chunk: Vec<[usize; N]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, stream::ORACLE, c as u64);
            let len = CHUNK.min(reps - c * CHUNK);
            let mut acc = [0usize; N];
            for _ in 0..len {
                for (a, hit) in acc.iter_mut().zip(body(&mut rng)) {
                    *a += hit as usize;
                }
            }
            acc
        })
        .collect();
    let mut total = [0usize; N];
    for acc in per_chunk {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    total
}

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.is_empty() || spectrum.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Config("spectrum must be nonempty, finite and nonnegative".into()));
    }
    Ok(())
}

/// Two-sided concentration of `ZᵀAZ` for `A = diag(spectrum)`:
/// upper event `> tr A + 2‖A‖_F √t + 2‖A‖ t`, lower event
/// `< tr A - 2‖A‖_F √t`, each with bound `e^{-t}`.
pub fn quadratic_tail_check(spectrum: &[f64], t: f64, reps: usize, seed: u64) -> Result<TwoSidedOutcome> {
    check_spectrum(spectrum)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("t must be positive, got {t}")));
    }
    if reps < 1000 {
        return Err(Error::Config(format!("need at least 1000 replications, got {reps}")));
    }
    let tr: f64 = spectrum.iter().sum();
    let fro = spectrum.iter().map(|l| l * l).sum::<f64>().sqrt();
    let op = spectrum.iter().copied().fold(0.0, f64::max);
    let upper = tr + 2.0 * fro * t.sqrt() + 2.0 * op * t;
    let lower = tr - 2.0 * fro * t.sqrt();
    let p = spectrum.len();
    let [hi, lo] = tally(reps, seed, |rng| {
        let z = gaussian_vector(rng, p);
        let q: f64 = z.iter().zip(spectrum).map(|(z, l)| l * z * z).sum();
        [q > upper, q < lower]
    });
    let bound = (-t).exp();
    Ok(TwoSidedOutcome::new(
        McOutcome::new(hi, reps, bound),
        McOutcome::new(lo, reps, bound),
    ))
}

/// Stated failure bound for the singular values of `ΛS`, clamped to one.
pub fn lambda_sketch_bound(spectrum: &[f64], n_cols: usize, t: f64) -> f64 {
    let top = spectrum.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 1.0;
    }
    let s: Vec<f64> = spectrum.iter().map(|l| l / top).collect();
    let l2sq: f64 = s.iter().map(|l| l * l).sum();
    let l4: f64 = s.iter().map(|l| l.powi(4)).sum();
    let rate = (l2sq * l2sq * t * t / (16.0 * l4)).min(l2sq * t / 4.0);
    let log_bound = n_cols as f64 * 9f64.ln() + 2f64.ln() - rate;
    log_bound.min(0.0).exp()
}

/// Checks `(1-t)‖λ‖₂ ≤ s_min(ΛS) ≤ s_max(ΛS) ≤ (1+t)‖λ‖₂` for Gaussian
/// `S` with `n_cols` columns.
pub fn lambda_sketch_singular_check(
    spectrum: &[f64],
    n_cols: usize,
    t: f64,
    reps: usize,
    seed: u64,
) -> Result<McOutcome> {
    check_spectrum(spectrum)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("t must lie in (0, 1), got {t}")));
    }
    if n_cols < 1 || n_cols > spectrum.len() {
        return Err(Error::Config(format!(
            "n_cols must lie in 1..={}, got {n_cols}",
            spectrum.len()
        )));
    }
    if reps < 1 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let norm = spectrum.iter().map(|l| l * l).sum::<f64>().sqrt();
    let (lo, hi) = ((1.0 - t) * norm, (1.0 + t) * norm);
    let n = spectrum.len();
    let [fail] = tally(reps, seed, |rng| {
        let mut m = gaussian_matrix(rng, n, n_cols);
        for (i, l) in spectrum.iter().enumerate() {
            m.row_mut(i).scale_mut(*l);
        }
        let ev = linalg::sym_eigenvalues_desc(&m.tr_mul(&m));
        let smax = ev[0].max(0.0).sqrt();
        let smin = ev.last().unwrap().max(0.0).sqrt();
        [smin < lo || smax > hi]
    });
    Ok(McOutcome::new(fail, reps, lambda_sketch_bound(spectrum, n_cols, t)))
}

/// Extreme eigenvalues of `PPᵀ/p` for a `k×p` Gaussian `P` against
/// `(1 ± √(k/p) ± t)²`, each with bound `e^{-p t²/2}`.
pub fn wishart_eigen_check(k: usize, p: usize, t: f64, reps: usize, seed: u64) -> Result<TwoSidedOutcome> {
    if k < 1 || k > p {
        return Err(Error::Config(format!("need 1 <= k <= p, got k={k}, p={p}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("t must be positive, got {t}")));
    }
    if reps < 1 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let ratio = (k as f64 / p as f64).sqrt();
    let upper = (1.0 + ratio + t).powi(2);
    let lower_root = 1.0 - ratio - t;
    let [hi, lo] = tally(reps, seed, |rng| {
        let m = gaussian_matrix(rng, k, p);
        let gram = (&m * m.transpose()) / p as f64;
        let ev = linalg::sym_eigenvalues_desc(&gram);
        let lo_fail = lower_root > 0.0 && *ev.last().unwrap() <= lower_root * lower_root;
        [ev[0] >= upper, lo_fail]
    });
    let bound = (-(p as f64) * t * t / 2.0).exp();
    Ok(TwoSidedOutcome::new(
        McOutcome::new(hi, reps, bound),
        McOutcome::new(lo, reps, bound),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormIneq {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `‖λ‖₁/‖λ‖₂ ≥ (‖λ‖₂⁴/‖λ‖₄⁴)^{1/8}`.
pub fn matrix_norm_ineq_check(spectrum: &[f64]) -> Result<NormIneq> {
    if spectrum.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Domain("spectrum must be finite and nonnegative".into()));
    }
    let top = spectrum.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Err(Error::DegenerateInput("spectrum is identically zero".into()));
    }
    let s: Vec<f64> = spectrum.iter().map(|l| l / top).collect();
    let l1: f64 = s.iter().sum();
    let l2sq: f64 = s.iter().map(|l| l * l).sum();
    let l4: f64 = s.iter().map(|l| l.powi(4)).sum();
    let lhs = l1 / l2sq.sqrt();
    let rhs = (l2sq * l2sq / l4).powf(0.125);
    Ok(NormIneq {
        lhs,
        rhs,
        pass: lhs >= rhs * (1.0 - 1e-10),
    })
}

/// Frequencies of the two conditioning events used to control the retained
/// signal, over fresh Gaussian sketches in the eigenbasis.
pub fn spectral_bounds_frequency(
    spectrum: &[f64],
    r: usize,
    k: usize,
    c2_const: f64,
    reps: usize,
    seed: u64,
) -> Result<SpectralFrequencies> {
    check_spectrum(spectrum)?;
    let p = spectrum.len();
    if r < 1 || r > k || k > p - r {
        return Err(Error::Config(format!("need 1 <= r <= k <= p - r, got r={r}, k={k}, p={p}")));
    }
    if reps < 1 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let tail = &spectrum[r..];
    let [a, b] = tally(reps, seed, |rng| {
        let s = gaussian_matrix(rng, p, k);
        let s1 = s.rows(0, r);
        let mut s2w = s.rows(r, p - r).into_owned();
        let s2 = s2w.clone();
        for (i, l) in tail.iter().enumerate() {
            s2w.row_mut(i).scale_mut(*l);
        }
        let kappa = |m: &DMatrix<f64>| {
            let ev = linalg::sym_eigenvalues_desc(m);
            let lo = *ev.last().unwrap();
            if lo > 0.0 {
                ev[0] / lo
            } else {
                f64::INFINITY
            }
        };
        let ka2 = kappa(&s2.tr_mul(&s2w));
        let kb1 = kappa(&(s1 * s1.transpose()));
        [ka2 <= 4.0, kb1 <= c2_const]
    });
    Ok(SpectralFrequencies {
        tail_kappa_le_4: a as f64 / reps as f64,
        head_kappa_le_c2: b as f64 / reps as f64,
        reps,
    })
}
