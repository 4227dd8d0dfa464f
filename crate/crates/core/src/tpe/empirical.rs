//! Sample TPE moments from one channel draw, built from Krylov blocks of the
//! estimated-channel Gram operator without forming or inverting any M×M matrix.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// `a_k`, `E_k`, `B_{k,i}` for one realization.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub j: usize,
    pub k: usize,
    pub a: Vec<DVector<Complex64>>,
    pub e: Vec<CMatrix>,
    /// `b[k * K + i]` is `B_{k,i}`.
    pub b: Vec<CMatrix>,
    /// `krylov[ℓ]` has columns `S^ℓ ĥ_k`.
    pub krylov: Vec<CMatrix>,
}

impl EmpiricalMoments {
    pub fn b(&self, k: usize, i: usize) -> &CMatrix {
        &self.b[k * self.k + i]
    }
}

/// Applies `S = (1/K) Ĥ diag(q) Ĥ^H` to every column of `x`.
fn apply_gram(h_est: &CMatrix, q: &[f64], x: &CMatrix) -> CMatrix {
    let kf = h_est.ncols() as f64;
    let mut y = h_est.adjoint() * x;
    for (r, mut row) in y.row_iter_mut().enumerate() {
        row *= Complex64::from(q[r] / kf);
    }
    h_est * y
}

/// Krylov blocks `[S^ℓ ĥ_1, …, S^ℓ ĥ_K]` for `ℓ = 0..J`.
pub fn krylov_blocks(h_est: &CMatrix, q: &[f64], j: usize) -> Vec<CMatrix> {
    let mut blocks = Vec::with_capacity(j);
    blocks.push(h_est.clone());
    for l in 1..j {
        let next = apply_gram(h_est, q, &blocks[l - 1]);
        blocks.push(next);
    }
    blocks
}

pub fn build_empirical_moments(h_true: &CMatrix, h_est: &CMatrix, q: &[f64], j: usize) -> Result<EmpiricalMoments> {
    let k = h_est.ncols();
    if h_true.shape() != h_est.shape() || q.len() != k {
        return Err(Error::input("channel and power dimensions disagree"));
    }
    if j == 0 {
        return Err(Error::input("truncation order J must be at least 1"));
    }
    let kf = k as f64;
    let krylov = krylov_blocks(h_est, q, j);
    // t[ℓ][(k, i)] = h_k^H S^ℓ ĥ_i
    let t: Vec<CMatrix> = krylov.iter().map(|kr| h_true.adjoint() * kr).collect();

    let a = (0..k).map(|c| DVector::from_fn(j, |l, _| t[l][(c, c)] / kf)).collect();
    let e = (0..k)
        .map(|c| CMatrix::from_fn(j, j, |l, m| krylov[l].column(c).dotc(&krylov[m].column(c)) / kf))
        .collect();
    let mut b = Vec::with_capacity(k * k);
    for kk in 0..k {
        for i in 0..k {
            b.push(CMatrix::from_fn(j, j, |l, m| t[l][(kk, i)] * t[m][(kk, i)].conj() / kf));
        }
    }
    Ok(EmpiricalMoments { j, k, a, e, b, krylov })
}

/// `v_k = Σ_ℓ w_{k,ℓ} S^ℓ ĥ_k / √K`, one column per UE.
pub fn tpe_beamformers(moments: &EmpiricalMoments, weights: &[DVector<f64>]) -> CMatrix {
    let (m, k) = moments.krylov[0].shape();
    let s = 1.0 / (k as f64).sqrt();
    CMatrix::from_fn(m, k, |r, c| {
        weights[c].iter().enumerate().map(|(l, w)| moments.krylov[l][(r, c)] * (w * s)).sum()
    })
}

/// `w^T X w` for Hermitian `X` and real `w`.
pub(crate) fn real_quad(w: &DVector<f64>, x: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for r in 0..w.len() {
        for c in 0..w.len() {
            acc += w[r] * w[c] * x[(r, c)].re;
        }
    }
    acc
}

fn signal(w: &DVector<f64>, a: &DVector<Complex64>) -> f64 {
    w.iter().zip(a.iter()).map(|(w, a)| a * *w).sum::<Complex64>().norm_sqr()
}

/// Downlink SINRs of the polynomial precoder with weights `w` and powers `p`.
pub fn empirical_dl_sinr(moments: &EmpiricalMoments, weights: &[DVector<f64>], p: &[f64], rho: f64) -> Vec<f64> {
    let k = moments.k;
    let kf = k as f64;
    let norms: Vec<f64> = (0..k).map(|c| real_quad(&weights[c], &moments.e[c])).collect();
    (0..k)
        .map(|c| {
            let interf: f64 = (0..k)
                .filter(|&i| i != c)
                .map(|i| p[i] / kf * real_quad(&weights[i], moments.b(c, i)) / norms[i])
                .sum();
            p[c] * signal(&weights[c], &moments.a[c]) / norms[c] / (interf + 1.0 / rho)
        })
        .collect()
}

/// Uplink SINRs of the polynomial receiver with weights `w` and powers `q`.
pub fn empirical_ul_sinr(moments: &EmpiricalMoments, weights: &[DVector<f64>], q: &[f64], rho: f64) -> Vec<f64> {
    let k = moments.k;
    let kf = k as f64;
    (0..k)
        .map(|c| {
            let w = &weights[c];
            let interf: f64 = (0..k)
                .filter(|&i| i != c)
                .map(|i| q[i] / kf * real_quad(w, moments.b(i, c)))
                .sum();
            q[c] * signal(w, &moments.a[c]) / (interf + real_quad(w, &moments.e[c]) / rho)
        })
        .collect()
}
