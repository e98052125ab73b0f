use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenbasis of a covariance matrix. `Identity` keeps large diagonal
/// problems from materialising a `p×p` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Identity(p) => *p,
            Basis::Dense(u) => u.nrows(),
        }
    }
}

/// `Σ = U diag(λ) Uᵀ` with `λ` descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovFactor {
    basis: Basis,
    spectrum: Vec<f64>,
}

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("spectrum must be finite and nonnegative".into()));
    }
    if spectrum.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("spectrum must be sorted descending".into()));
    }
    Ok(())
}

impl CovFactor {
    /// Checks orthogonality of `basis` to `1e-10` entrywise.
    pub fn new(basis: DMatrix<f64>, spectrum: Vec<f64>) -> Result<Self> {
        let p = spectrum.len();
        if basis.nrows() != p || basis.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "basis is {}x{} but spectrum has length {p}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        check_spectrum(&spectrum)?;
        let err = (basis.transpose() * &basis - DMatrix::<f64>::identity(p, p)).abs().max();
        if err > 1e-10 {
            return Err(Error::Config(format!("basis is not orthogonal (max error {err:.2e})")));
        }
        Ok(Self {
            basis: Basis::Dense(basis),
            spectrum,
        })
    }

    /// Caller guarantees `basis` is orthogonal.
    pub(crate) fn from_parts_unchecked(basis: Basis, spectrum: Vec<f64>) -> Self {
        debug_assert_eq!(basis.dim(), spectrum.len());
        Self { basis, spectrum }
    }

    /// `Σ = diag(λ)`.
    pub fn diagonal(spectrum: Vec<f64>) -> Result<Self> {
        check_spectrum(&spectrum)?;
        Ok(Self {
            basis: Basis::Identity(spectrum.len()),
            spectrum,
        })
    }

    pub fn p(&self) -> usize {
        self.spectrum.len()
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn basis_matrix(&self) -> DMatrix<f64> {
        match &self.basis {
            Basis::Identity(p) => DMatrix::identity(*p, *p),
            Basis::Dense(u) => u.clone(),
        }
    }

    /// Same basis, new spectrum.
    pub fn with_spectrum(&self, spectrum: Vec<f64>) -> Result<Self> {
        if spectrum.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum length {} does not match p = {}",
                spectrum.len(),
                self.p()
            )));
        }
        check_spectrum(&spectrum)?;
        Ok(Self {
            basis: self.basis.clone(),
            spectrum,
        })
    }

    /// `β̃ = Uᵀβ`.
    pub fn rotate(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Basis::Identity(_) => v.clone(),
            Basis::Dense(u) => u.tr_mul(v),
        }
    }

    /// `UᵀM`.
    pub fn rotate_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.basis {
            Basis::Identity(_) => m.clone(),
            Basis::Dense(u) => u.tr_mul(m),
        }
    }

    /// `U v`.
    pub fn unrotate(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Basis::Identity(_) => v.clone(),
            Basis::Dense(u) => u * v,
        }
    }

    fn assemble(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let p = self.p();
        match &self.basis {
            Basis::Identity(_) => {
                DMatrix::from_diagonal(&DVector::from_iterator(p, self.spectrum.iter().map(|&l| f(l))))
            }
            Basis::Dense(u) => {
                let mut ud = u.clone();
                for (j, &l) in self.spectrum.iter().enumerate() {
                    ud.column_mut(j).scale_mut(f(l));
                }
                let m = ud * u.transpose();
                0.5 * (&m + m.transpose())
            }
        }
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        self.assemble(|l| l)
    }

    /// Symmetric root `U Λ^{1/2} Uᵀ`.
    pub fn sqrt_sigma(&self) -> DMatrix<f64> {
        self.assemble(f64::sqrt)
    }

    /// `X Σ^{1/2}` for a row-major data matrix `X` (`n×p`).
    pub fn right_mul_sqrt(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.basis {
            Basis::Identity(_) => {
                let mut x = z.clone();
                for (j, &l) in self.spectrum.iter().enumerate() {
                    x.column_mut(j).scale_mut(l.sqrt());
                }
                x
            }
            Basis::Dense(u) => {
                let mut zu = z * u;
                for (j, &l) in self.spectrum.iter().enumerate() {
                    zu.column_mut(j).scale_mut(l.sqrt());
                }
                zu * u.transpose()
            }
        }
    }

    /// `βᵀΣβ`.
    pub fn signal(&self, beta: &DVector<f64>) -> f64 {
        let bt = self.rotate(beta);
        signal_rotated(&bt, &self.spectrum)
    }

    /// `‖Σβ‖²`.
    pub fn sigma_beta_norm_sq(&self, beta: &DVector<f64>) -> f64 {
        let bt = self.rotate(beta);
        bt.iter().zip(&self.spectrum).map(|(b, l)| (l * b).powi(2)).sum()
    }

    /// `‖Σ‖_F`.
    pub fn frobenius(&self) -> f64 {
        self.spectrum.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

/// `Σ λ_i β̃_i²`.
pub fn signal_rotated(beta_rot: &DVector<f64>, spectrum: &[f64]) -> f64 {
    beta_rot.iter().zip(spectrum).map(|(b, l)| l * b * b).sum()
}

/// Coefficient vector with an optional cached rotation `Uᵀβ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub beta: DVector<f64>,
    pub rotated: Option<DVector<f64>>,
}

impl CoefficientVector {
    pub fn new(beta: DVector<f64>) -> Self {
        Self { beta, rotated: None }
    }

    pub fn with_rotation(mut self, cov: &CovFactor) -> Self {
        self.rotated = Some(cov.rotate(&self.beta));
        self
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_quantities() {
        let cov = CovFactor::diagonal(vec![4.0, 1.0]).unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(cov.signal(&b), 8.0);
        assert_eq!(cov.sigma_beta_norm_sq(&b), 16.0 + 4.0);
        assert_eq!(cov.sqrt_sigma()[(0, 0)], 2.0);
    }

    #[test]
    fn rejects_unsorted_and_non_orthogonal() {
        assert!(CovFactor::diagonal(vec![1.0, 2.0]).is_err());
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(CovFactor::new(u, vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn dense_rotation_roundtrip() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        let cov = CovFactor::new(u, vec![3.0, 1.0]).unwrap();
        let b = DVector::from_vec(vec![0.3, -1.2]);
        let back = cov.unrotate(&cov.rotate(&b));
        assert!((back - &b).norm() < 1e-14);
        let direct = (b.transpose() * cov.sigma() * &b)[(0, 0)];
        assert!((direct - cov.signal(&b)).abs() < 1e-13);
    }
}
