//! Small dense linear-algebra helpers shared by the transceiver modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative eigenvalue floor below which a symmetric matrix is declared singular.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `(1/K) Σ_i w_i h_i h_i^H + reg·I` for the columns of `h`.
pub fn weighted_gram(h: &CMatrix, weights: &[f64], reg: f64) -> CMatrix {
    let (m, k) = h.shape();
    let mut scaled = h.clone();
    for (i, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from(weights[i] / k as f64);
    }
    let mut g = &scaled * h.adjoint();
    for d in 0..m {
        g[(d, d)] += Complex64::from(reg);
    }
    g
}

/// `A^{-1} B` for Hermitian positive definite `A`, through its Cholesky factor.
pub fn hpd_solve(a: CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::Conditioning("matrix is not Hermitian positive definite".into()))
}

/// `x^H A y`.
pub fn quad_form(x: &CVector, a: &CMatrix, y: &CVector) -> Complex64 {
    x.dotc(&(a * y))
}

/// Symmetric inverse square root through an eigendecomposition.
///
/// Eigenvalues under `EIGEN_FLOOR` times the largest one are rejected rather than
/// clamped.
pub fn sym_inv_sqrt(e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = e.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= EIGEN_FLOOR * max {
        return Err(Error::Conditioning(format!(
            "moment matrix eigenvalues [{min:.3e}, {max:.3e}] fall below the positivity floor"
        )));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let v = &eig.eigenvectors;
    Ok(v * d * v.transpose())
}

/// 2-norm condition number of a square real matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `(I − τ Γ F) p = (τ/ρ) Γ 1`, the SINR-balancing system shared by the exact
/// and TPE precoders. `gamma_diag` holds the diagonal of Γ.
pub fn balance_powers(gamma_diag: &[f64], f: &DMatrix<f64>, tau: f64, rho: f64) -> Result<Vec<f64>> {
    let k = gamma_diag.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    for r in 0..k {
        for c in 0..k {
            a[(r, c)] -= tau * gamma_diag[r] * f[(r, c)];
        }
    }
    let cond = condition_number(&a);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Infeasible(format!(
            "balancing system has condition number {cond:.3e}"
        )));
    }
    let rhs = DVector::from_iterator(k, gamma_diag.iter().map(|g| tau / rho * g));
    let p = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Infeasible("balancing system is singular".into()))?;
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Infeasible(format!("power of UE {i} is {v:.3e}")));
    }
    Ok(p.iter().cloned().collect())
}
