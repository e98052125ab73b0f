//! Small dense helpers shared by the test statistics and the oracles.

use nalgebra::{DMatrix, DVector};

/// Ratio of extreme singular values of `m`; `inf` when the smallest is zero.
pub fn cond(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return f64::INFINITY;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 || !smin.is_finite() {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub struct LstsqFit {
    pub coef: DVector<f64>,
    pub fitted: DVector<f64>,
    pub rss: f64,
}

/// Householder least squares. Returns `Err(cond(A))` when that exceeds
/// `max_cond`.
pub fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>, max_cond: f64) -> Result<LstsqFit, f64> {
    let m = a.ncols();
    let qr = a.clone().qr();
    let r = qr.r();
    let c = cond(&r);
    if !(c <= max_cond) {
        return Err(c);
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, m).into_owned();
    let coef = match r.solve_upper_triangular(&head) {
        Some(c) => c,
        None => return Err(f64::INFINITY),
    };
    let rss = qty.rows(m, qty.len() - m).norm_squared();
    let fitted = a * &coef;
    Ok(LstsqFit {
        coef,
        fitted,
        rss,
    })
}

/// Full `n×n` orthogonal factor of the QR decomposition of an `n×m` matrix.
pub fn full_q(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let qr = a.clone().qr();
    let mut qt = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut qt);
    qt.transpose()
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = 0.5 * (m + m.transpose());
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
