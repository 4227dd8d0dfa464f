//! Exact max-min weighted SINR precoder and receiver (OLP/OLR).
//!
//! The dual uplink powers come from a normalized Picard iteration; the receive
//! directions are MMSE filters; the downlink powers follow from UL-DL duality by
//! balancing the weighted SINRs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{balance_powers, hpd_solve, weighted_gram, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the relative sup-norm update drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    /// Dual uplink powers.
    pub q: Vec<f64>,
    /// Common weighted SINR level.
    pub tau: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Unit-norm directions plus downlink powers; column k of the precoder is
/// `√(p_k/K)·u_k`.
#[derive(Debug, Clone)]
pub struct Precoder {
    pub directions: CMatrix,
    pub dl_powers: Vec<f64>,
}

impl Precoder {
    pub fn matrix(&self) -> CMatrix {
        let k = self.dl_powers.len() as f64;
        let mut g = self.directions.clone();
        for (c, mut col) in g.column_iter_mut().enumerate() {
            col *= Complex64::from((self.dl_powers[c] / k).sqrt());
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub dl: Vec<f64>,
    pub ul: Vec<f64>,
    pub weighted_min: f64,
}

impl SinrReport {
    pub fn new(dl: Vec<f64>, ul: Vec<f64>, gamma: &[f64]) -> Self {
        let weighted_min = weighted_min(&dl, gamma).min(weighted_min(&ul, gamma));
        Self { dl, ul, weighted_min }
    }
}

pub fn weighted_min(sinr: &[f64], gamma: &[f64]) -> f64 {
    sinr.iter().zip(gamma).map(|(s, g)| s / g).fold(f64::INFINITY, f64::min)
}

/// `(1/K) h_k^H (Σ_{ℓ≠k} (q_ℓ/K) h_ℓ h_ℓ^H + I/ρ)^{-1} h_k` for every k, from one
/// shared Cholesky factor and the rank-one downdate.
fn leave_one_out_gains(h: &CMatrix, q: &[f64], rho: f64) -> Result<Vec<f64>> {
    let k = h.ncols();
    let kf = k as f64;
    let qh = hpd_solve(weighted_gram(h, q, 1.0 / rho), h)?;
    Ok((0..k)
        .map(|c| {
            let full = h.column(c).dotc(&qh.column(c)).re;
            full / (1.0 - q[c] / kf * full) / kf
        })
        .collect())
}

/// Solves `q_k = γ_k τ / d_k(q)`, `τ = K P_max / Σ_n γ_n / d_n(q)`.
///
/// Every iterate satisfies `(1/K) Σ q_k = P_max`. The update switches to a 0.5
/// damped step if the residual fails to decrease for several iterations.
pub fn solve_dual_powers(
    h: &CMatrix,
    gamma: &[f64],
    rho: f64,
    p_max: f64,
    opts: SolverOptions,
) -> Result<FixedPointResult> {
    let k = h.ncols();
    if gamma.len() != k {
        return Err(Error::input("gamma length does not match the channel"));
    }
    if let Some(c) = (0..k).find(|&c| h.column(c).norm_squared() == 0.0) {
        return Err(Error::input(format!("channel of UE {c} is zero")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    let kf = k as f64;
    let mut q = vec![p_max; k];
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    let mut damped = false;

    for iter in 1..=opts.max_iter {
        let d = leave_one_out_gains(h, &q, rho)?;
        let tau = kf * p_max / gamma.iter().zip(&d).map(|(g, d)| g / d).sum::<f64>();
        let mut next: Vec<f64> = gamma.iter().zip(&d).map(|(g, d)| g * tau / d).collect();
        if damped {
            for (n, o) in next.iter_mut().zip(&q) {
                *n = 0.5 * (*n + o);
            }
        }
        residual = next
            .iter()
            .zip(&q)
            .map(|(n, o)| ((n - o) / n).abs())
            .fold(0.0, f64::max);
        q = next;
        if residual <= opts.tol {
            let d = leave_one_out_gains(h, &q, rho)?;
            let tau = kf * p_max / gamma.iter().zip(&d).map(|(g, d)| g / d).sum::<f64>();
            return Ok(FixedPointResult { q, tau, iterations: iter, residual });
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                damped = true;
            }
        }
    }
    Err(Error::Convergence { what: "dual power fixed point", iterations: opts.max_iter, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMode {
    /// `(Σ_{ℓ≠k} (q_ℓ/K) h_ℓ h_ℓ^H + I/ρ)^{-1} h_k`, one factorization per UE.
    LeaveOneOut,
    /// `(Σ_ℓ (q_ℓ/K) h_ℓ h_ℓ^H + I/ρ)^{-1} h_k`, one shared factorization.
    Full,
}

/// Unit-norm MMSE-type directions for the powers `q`.
pub fn compute_directions(h: &CMatrix, q: &[f64], rho: f64, mode: DirectionMode) -> Result<CMatrix> {
    let k = h.ncols();
    let mut v = match mode {
        DirectionMode::Full => hpd_solve(weighted_gram(h, q, 1.0 / rho), h)?,
        DirectionMode::LeaveOneOut => {
            let mut v = CMatrix::zeros(h.nrows(), k);
            for c in 0..k {
                let mut ql = q.to_vec();
                ql[c] = 0.0;
                let sol = hpd_solve(weighted_gram(h, &ql, 1.0 / rho), &h.columns(c, 1).into_owned())?;
                v.set_column(c, &sol.column(0));
            }
            v
        }
    };
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        col /= Complex64::from(n);
    }
    Ok(v)
}

/// |h_k^H u_i|² for all pairs (row k, column i).
fn cross_gains(h: &CMatrix, directions: &CMatrix) -> DMatrix<f64> {
    (h.adjoint() * directions).map(|c| c.norm_sqr())
}

/// Downlink powers that make every `SINR_k/γ_k` equal to `tau` on `h_eval`.
pub fn allocate_dl_powers(
    h_eval: &CMatrix,
    directions: &CMatrix,
    gamma: &[f64],
    tau: f64,
    rho: f64,
) -> Result<Vec<f64>> {
    let k = h_eval.ncols();
    let kf = k as f64;
    let g2 = cross_gains(h_eval, directions);
    let gamma_diag: Vec<f64> = (0..k).map(|c| kf * gamma[c] / g2[(c, c)]).collect();
    let f = DMatrix::from_fn(k, k, |r, c| if r == c { 0.0 } else { g2[(r, c)] / kf });
    balance_powers(&gamma_diag, &f, tau, rho)
}

/// Downlink SINRs of the precoder on the channel `h_true`.
pub fn dl_sinr(h_true: &CMatrix, precoder: &Precoder, rho: f64) -> Vec<f64> {
    let k = h_true.ncols();
    let kf = k as f64;
    let g2 = cross_gains(h_true, &precoder.directions);
    (0..k)
        .map(|r| {
            let p = &precoder.dl_powers;
            let interference: f64 = (0..k).filter(|&c| c != r).map(|c| p[c] / kf * g2[(r, c)]).sum();
            p[r] / kf * g2[(r, r)] / (interference + 1.0 / rho)
        })
        .collect()
}

/// Uplink SINRs with receive filters `v` (any scaling) and UL powers `q`.
pub fn ul_sinr(h_true: &CMatrix, v: &CMatrix, q: &[f64], rho: f64) -> Vec<f64> {
    let k = h_true.ncols();
    let kf = k as f64;
    // |h_i^H v_k|² at (i, k)
    let g2 = cross_gains(h_true, v);
    (0..k)
        .map(|c| {
            let noise = v.column(c).norm_squared() / rho;
            let interference: f64 = (0..k).filter(|&i| i != c).map(|i| q[i] / kf * g2[(i, c)]).sum();
            q[c] / kf * g2[(c, c)] / (interference + noise)
        })
        .collect()
}

/// Full plug-in OLP/OLR design from the estimated channel.
#[derive(Debug, Clone)]
pub struct ExactDesign {
    pub fixed_point: FixedPointResult,
    pub precoder: Precoder,
}

pub fn design_olp(
    h_est: &CMatrix,
    gamma: &[f64],
    rho: f64,
    p_max: f64,
    opts: SolverOptions,
) -> Result<ExactDesign> {
    let fixed_point = solve_dual_powers(h_est, gamma, rho, p_max, opts)?;
    let directions = compute_directions(h_est, &fixed_point.q, rho, DirectionMode::Full)?;
    let dl_powers = allocate_dl_powers(h_est, &directions, gamma, fixed_point.tau, rho)?;
    Ok(ExactDesign { fixed_point, precoder: Precoder { directions, dl_powers } })
}
