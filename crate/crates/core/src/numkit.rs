//! Normal and F distribution machinery.
//!
//! Conventions: [`std_normal_quantile`] is lower-tail (`Φ(z) = q`), while
//! [`f_quantile`] is upper-tail (`P(F ≥ q) = alpha`).

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `alpha` together with the degrees of freedom of an F reference law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    pub alpha: f64,
    pub d1: u64,
    pub d2: u64,
}

impl QuantileSpec {
    pub fn new(alpha: f64, d1: u64, d2: u64) -> Result<Self> {
        check_prob("alpha", alpha)?;
        if d1 == 0 || d2 == 0 {
            return domain(format!("degrees of freedom must be positive, got ({d1}, {d2})"));
        }
        Ok(Self { alpha, d1, d2 })
    }

    /// Upper-`alpha` quantile `q_{alpha,d1,d2}`.
    pub fn f_threshold(&self) -> Result<f64> {
        f_quantile(self.alpha, self.d1 as f64, self.d2 as f64)
    }

    /// Upper-`alpha` normal quantile `z_alpha`.
    pub fn z_alpha(&self) -> Result<f64> {
        std_normal_quantile(1.0 - self.alpha)
    }
}

fn check_prob(name: &str, q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("{name} must lie in (0, 1), got {q}"));
    }
    Ok(())
}

pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Lower-tail quantile: returns `z` with `Φ(z) = q`.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    check_prob("q", q)?;
    let mut z = -SQRT_2 * erfc_inv(2.0 * q);
    // Two Newton steps take the inverse to full double precision.
    for _ in 0..2 {
        let pdf = std_normal_pdf(z);
        if pdf > 0.0 {
            z -= (std_normal_cdf(z) - q) / pdf;
        }
    }
    Ok(z)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return domain(format!("shape parameters must be positive, got ({a}, {b})"));
    }
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("x must lie in [0, 1], got {x}"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front = beta_front(x, a, b).exp();
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_tail(x, a, b)? / a
    } else {
        1.0 - front * beta_tail(1.0 - x, b, a)? / b
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Stirling remainder `ln Γ(x) - [(x - 1/2) ln x - x + ln(2π)/2]`.
fn stirling_remainder(x: f64) -> f64 {
    if x >= 10.0 {
        let r = 1.0 / x;
        let r2 = r * r;
        r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))
    } else {
        ln_gamma(x) - ((x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln())
    }
}

/// `ln[x^a (1-x)^b / B(a, b)]`, arranged so the large terms cancel
/// analytically instead of in floating point.
fn beta_front(x: f64, a: f64, b: f64) -> f64 {
    let s = a + b;
    let d = x * b - (1.0 - x) * a;
    a * (d / a).ln_1p() + b * (-d / b).ln_1p() + 0.5 * (a * b / s).ln()
        - 0.5 * (2.0 * std::f64::consts::PI).ln()
        - (stirling_remainder(a) + stirling_remainder(b) - stirling_remainder(s))
}

/// Evaluates the continued fraction for `I_x(a,b)` (modified Lentz). Falls
/// back to the power series when the fraction stalls.
fn beta_tail(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 200 + (20.0 * (a.max(b)).sqrt()) as usize * 10;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    beta_series(x, a, b)
}

/// Power series `sum_n (1-b)_n x^n / (n! (a+n))`, scaled so that
/// `front * result / a` matches the continued-fraction form.
fn beta_series(x: f64, a: f64, b: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0 / a;
    for n in 1..100_000 {
        let nf = n as f64;
        term *= (nf - b) * x / nf;
        let add = term / (a + nf);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            // front*sum is I_x(a,b) before dividing by (1-x)^b.
            return Ok(a * sum / (1.0 - x).powf(b));
        }
    }
    Err(Error::Convergence(format!(
        "incomplete beta did not converge at x={x}, a={a}, b={b}"
    )))
}

fn check_df(d1: f64, d2: f64) -> Result<()> {
    if !(d1 > 0.0 && d2 > 0.0) || !d1.is_finite() || !d2.is_finite() {
        return domain(format!("degrees of freedom must be positive, got ({d1}, {d2})"));
    }
    Ok(())
}

/// `P(F_{d1,d2} ≤ x)`.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return domain(format!("F variate must be nonnegative, got {x}"));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let t = d1 * x;
    reg_inc_beta(t / (t + d2), d1 / 2.0, d2 / 2.0)
}

/// `P(F_{d1,d2} > x)`, computed from the complementary beta so small tails
/// keep their relative accuracy.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return domain(format!("F variate must be nonnegative, got {x}"));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    let t = d1 * x;
    reg_inc_beta(d2 / (t + d2), d2 / 2.0, d1 / 2.0)
}

pub fn f_pdf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if x < 0.0 {
        return domain(format!("F variate must be nonnegative, got {x}"));
    }
    if x == 0.0 {
        return Ok(match d1.partial_cmp(&2.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        });
    }
    let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let ln_p = 0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln()
        - 0.5 * (d1 + d2) * (d1 * x / d2).ln_1p()
        - ln_b;
    Ok(ln_p.exp())
}

/// Upper-tail quantile `q` with `P(F_{d1,d2} > q) = alpha`.
pub fn f_quantile(alpha: f64, d1: f64, d2: f64) -> Result<f64> {
    check_prob("alpha", alpha)?;
    check_df(d1, d2)?;
    let target = 1.0 - alpha;

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grown = 0;
    while f_cdf(hi, d1, d2)? < target {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 1100 || !hi.is_finite() {
            return Err(Error::Convergence(format!(
                "could not bracket F quantile (alpha={alpha}, d1={d1}, d2={d2})"
            )));
        }
    }
    if grown == 0 {
        let mut shrunk = 0;
        while lo == 0.0 && f_cdf(hi / 2.0, d1, d2)? >= target {
            hi /= 2.0;
            shrunk += 1;
            if shrunk > 1100 {
                return Err(Error::Convergence(format!(
                    "could not bracket F quantile (alpha={alpha}, d1={d1}, d2={d2})"
                )));
            }
        }
        if shrunk > 0 {
            lo = hi / 2.0;
        }
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_cdf(mid, d1, d2)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }

    let mut q = 0.5 * (lo + hi);
    let pdf = f_pdf(q, d1, d2)?;
    if pdf.is_finite() && pdf > 0.0 {
        let step = (f_cdf(q, d1, d2)? - target) / pdf;
        let polished = q - step;
        if polished >= lo && polished <= hi {
            q = polished;
        }
    }

    let err = (f_cdf(q, d1, d2)? - target).abs();
    if err > 1e-9 {
        return Err(Error::Convergence(format!(
            "F quantile residual {err:.3e} (alpha={alpha}, d1={d1}, d2={d2})"
        )));
    }
    Ok(q)
}

/// Two-term approximation `1 + sqrt(2/(n δ (1-δ))) z_alpha` to the upper
/// quantile of `F(nδ, n(1-δ))`.
pub fn f_quantile_bai(alpha: f64, n: u64, delta: f64) -> Result<f64> {
    check_prob("alpha", alpha)?;
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    let nf = n as f64;
    if nf * delta < 1.0 || nf * (1.0 - delta) < 1.0 {
        return domain(format!(
            "both n*delta and n*(1-delta) must be at least 1 (n={n}, delta={delta})"
        ));
    }
    let z = std_normal_quantile(1.0 - alpha)?;
    Ok(1.0 + (2.0 / (nf * delta * (1.0 - delta))).sqrt() * z)
}

/// Mean of the noncentral `F(d1, d2, lambda)` law.
pub fn noncentral_f_mean(d1: f64, d2: f64, lambda: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if !(lambda >= 0.0) {
        return domain(format!("noncentrality must be nonnegative, got {lambda}"));
    }
    if d2 <= 2.0 {
        return domain(format!("mean undefined for d2 <= 2 (d2={d2})"));
    }
    Ok(d2 * (d1 + lambda) / (d1 * (d2 - 2.0)))
}

/// Mean and variance of the noncentral `F(d1, d2, lambda)` law.
pub fn noncentral_f_moments(d1: f64, d2: f64, lambda: f64) -> Result<(f64, f64)> {
    let mean = noncentral_f_mean(d1, d2, lambda)?;
    if d2 <= 4.0 {
        return domain(format!("variance undefined for d2 <= 4 (d2={d2})"));
    }
    let a = d1 + lambda;
    let var = 2.0 * (a * a + (d1 + 2.0 * lambda) * (d2 - 2.0))
        / ((d2 - 2.0).powi(2) * (d2 - 4.0))
        * (d2 / d1).powi(2);
    Ok((mean, var))
}

/// One-sample Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic<F>(sample: &[f64], mut cdf: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if sample.is_empty() {
        return Err(Error::DegenerateInput("empty sample".into()));
    }
    let mut xs = sample.to_vec();
    if xs.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateInput("sample contains NaN".into()));
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        let i = i as f64;
        d = d.max((i + 1.0) / n - f).max(f - i / n);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_basics() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(40.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(std_normal_quantile(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
    }

    #[test]
    fn beta_boundaries() {
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(reg_inc_beta(0.5, 1.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(reg_inc_beta(1.5, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn beta_closed_forms() {
        // I_x(a, 1) = x^a and I_x(1, b) = 1 - (1-x)^b.
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            assert_abs_diff_eq!(reg_inc_beta(x, 3.5, 1.0).unwrap(), x.powf(3.5), epsilon = 1e-13);
            assert_abs_diff_eq!(
                reg_inc_beta(x, 1.0, 6.0).unwrap(),
                1.0 - (1.0 - x).powi(6),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn beta_large_shapes_symmetry() {
        // I_{1/2}(a, a) = 1/2.
        for &a in &[50.0, 500.0, 5000.0] {
            assert_abs_diff_eq!(reg_inc_beta(0.5, a, a).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn f_cdf_equal_df_median() {
        assert_eq!(f_cdf(0.0, 3.0, 4.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f_cdf(1.0, 7.0, 7.0).unwrap(), 0.5, epsilon = 1e-13);
        assert!(f_cdf(-1.0, 3.0, 4.0).is_err());
    }

    #[test]
    fn f_quantile_median_and_roundtrip() {
        assert_abs_diff_eq!(f_quantile(0.5, 12.0, 12.0).unwrap(), 1.0, epsilon = 1e-10);
        let q = f_quantile(0.05, 25.0, 25.0).unwrap();
        assert_abs_diff_eq!(1.0 - f_cdf(q, 25.0, 25.0).unwrap(), 0.05, epsilon = 1e-9);
        let q = f_quantile(1e-6, 1.0, 1.0).unwrap();
        assert!(q > 1e10);
        let q = f_quantile(1.0 - 1e-6, 30.0, 5.0).unwrap();
        assert!(q > 0.0 && q < 0.1);
    }

    #[test]
    fn f_pdf_integrates_cdf() {
        let (d1, d2) = (6.0, 11.0);
        let (a, b) = (0.4, 1.9);
        let m = 2000;
        let h = (b - a) / m as f64;
        let mut s = f_pdf(a, d1, d2).unwrap() + f_pdf(b, d1, d2).unwrap();
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f_pdf(a + i as f64 * h, d1, d2).unwrap();
        }
        let integral = s * h / 3.0;
        let diff = f_cdf(b, d1, d2).unwrap() - f_cdf(a, d1, d2).unwrap();
        assert_abs_diff_eq!(integral, diff, epsilon = 1e-11);
    }

    #[test]
    fn bai_zero_quantile_term() {
        assert_abs_diff_eq!(f_quantile_bai(0.5, 2000, 0.3).unwrap(), 1.0, epsilon = 1e-15);
        assert!(f_quantile_bai(0.05, 10, 0.0).is_err());
        assert!(f_quantile_bai(0.05, 1, 0.5).is_err());
    }

    #[test]
    fn noncentral_mean_central_case() {
        let (m, _) = noncentral_f_moments(10.0, 100.0, 0.0).unwrap();
        assert_abs_diff_eq!(m, 100.0 / 98.0, epsilon = 1e-15);
        let slope = noncentral_f_mean(10.0, 100.0, 1.0).unwrap() - m;
        assert_abs_diff_eq!(slope, 100.0 / (10.0 * 98.0), epsilon = 1e-14);
        assert!(noncentral_f_moments(10.0, 4.0, 1.0).is_err());
        assert!(noncentral_f_mean(10.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn ks_of_perfect_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&xs, |x| Ok(x)).unwrap();
        assert_abs_diff_eq!(d, 0.005, epsilon = 1e-12);
    }
}
