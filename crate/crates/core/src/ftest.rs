//! Classical and sketched F-tests of `H0: β = 0`.
//!
//! The sketched test fits `y` on the projected design `XS` and compares the
//! resulting statistic with the `F(k, n-k)` reference law, which is exact
//! under the null for any fixed `X` and `S` when the noise is Gaussian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::SketchMatrix;
use crate::numkit::{f_quantile, f_sf};

/// Designs whose condition estimate exceeds this are rejected.
pub const MAX_DESIGN_COND: f64 = 1e12;
/// Gram matrices `SᵀXᵀXS` whose condition estimate exceeds this are rejected.
pub const MAX_SKETCH_GRAM_COND: f64 = 1e12;

const PERFECT_FIT_RTOL: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `+inf` when the residual sum of squares vanishes.
    pub statistic: f64,
    pub d1: usize,
    pub d2: usize,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub rss: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_rows(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but response has length {}",
            a.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Minimises `‖y - A c‖²` through a Householder QR of `A`.
pub fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    check_rows(a, y)?;
    let (n, m) = a.shape();
    if m < 1 || n <= m {
        return Err(Error::Dimension(format!("least squares needs n > m >= 1, got n={n}, m={m}")));
    }
    let fit = linalg::lstsq(a, y, MAX_DESIGN_COND).map_err(Error::SingularDesign)?;
    Ok(LeastSquares {
        coef: fit.coef,
        rss: fit.rss,
    })
}

/// Smallest double `t` with `P(F_{d1,d2} > t) ≤ alpha`, so that
/// `statistic ≥ t` and `p_value ≤ alpha` agree.
pub fn rejection_threshold(alpha: f64, d1: usize, d2: usize) -> Result<f64> {
    let (a, b) = (d1 as f64, d2 as f64);
    let q = f_quantile(alpha, a, b)?;
    let accepts = |x: f64| -> Result<bool> { Ok(f_sf(x, a, b)? > alpha) };

    let mut lo = q;
    let mut step = q * 1e-12 + f64::MIN_POSITIVE;
    while !accepts(lo)? {
        lo = (lo - step).max(0.0);
        step *= 2.0;
    }
    let mut hi = q;
    let mut step = q * 1e-12 + f64::MIN_POSITIVE;
    while accepts(hi)? {
        hi += step;
        step *= 2.0;
    }
    // Bisect on the bit pattern: positive doubles are ordered like their bits.
    let (mut lb, mut hb) = (lo.to_bits(), hi.to_bits());
    while hb - lb > 1 {
        let mid = lb + (hb - lb) / 2;
        if accepts(f64::from_bits(mid))? {
            lb = mid;
        } else {
            hb = mid;
        }
    }
    Ok(f64::from_bits(hb))
}

fn report(numerator: f64, rss: f64, y_norm_sq: f64, d1: usize, d2: usize, alpha: f64) -> Result<TestReport> {
    let threshold = rejection_threshold(alpha, d1, d2)?;
    let (statistic, p_value) = if y_norm_sq == 0.0 {
        (0.0, 1.0)
    } else if rss <= PERFECT_FIT_RTOL * y_norm_sq {
        (f64::INFINITY, 0.0)
    } else {
        let stat = ((numerator / d1 as f64) / (rss / d2 as f64)).max(0.0);
        (stat, f_sf(stat, d1 as f64, d2 as f64)?)
    };
    Ok(TestReport {
        statistic,
        d1,
        d2,
        threshold,
        p_value,
        reject: p_value <= alpha,
        alpha,
    })
}

/// Classical F-test with `(p, n - p)` degrees of freedom.
pub fn classical_f(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    check_rows(x, y)?;
    let (n, p) = x.shape();
    if p < 1 || n <= p {
        return Err(Error::Dimension(format!("classical F-test needs n > p >= 1, got n={n}, p={p}")));
    }
    let fit = linalg::lstsq(x, y, MAX_DESIGN_COND).map_err(Error::SingularDesign)?;
    report(fit.fitted.norm_squared(), fit.rss, y.norm_squared(), p, n - p, alpha)
}

/// F-test on an already projected `n×k` design, numerator `yᵀ(XS)β̂`.
pub fn f_test_projected(xs: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    check_rows(xs, y)?;
    let (n, k) = xs.shape();
    if k < 1 || k >= n {
        return Err(Error::Dimension(format!("sketched F-test needs 1 <= k < n, got n={n}, k={k}")));
    }
    let fit = linalg::lstsq(xs, y, MAX_SKETCH_GRAM_COND.sqrt()).map_err(|c| Error::SingularSketch(c * c))?;
    report(y.dot(&fit.fitted), fit.rss, y.norm_squared(), k, n - k, alpha)
}

/// Sketched F-test: fit on `XS`, reference law `F(k, n - k)`.
pub fn sketched_f(x: &DMatrix<f64>, y: &DVector<f64>, s: &SketchMatrix, alpha: f64) -> Result<TestReport> {
    if s.p() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "sketch has {} rows but design has {} columns",
            s.p(),
            x.ncols()
        )));
    }
    check_rows(x, y)?;
    let (n, k) = (x.nrows(), s.k());
    if k >= n {
        return Err(Error::Dimension(format!("sketch dimension k={k} must be below n={n}")));
    }
    f_test_projected(&(x * &s.entries), y, alpha)
}
