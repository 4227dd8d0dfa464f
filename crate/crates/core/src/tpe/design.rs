//! Max-min design of the polynomial weights and powers from deterministic moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exact::SolverOptions;
use crate::linalg::balance_powers;
use crate::tpe::moments::DeterministicMoments;
use crate::Link;

/// Optimal weights and the powers that go with them.
#[derive(Debug, Clone)]
pub struct TpeSolution {
    /// Unit-norm whitened weights `c*_k`.
    pub c_star: Vec<DVector<f64>>,
    /// Polynomial coefficients `w_k = Ē_k^{-1/2} c*_k`.
    pub weights: Vec<DVector<f64>>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub tau: f64,
    pub iterations: usize,
}

/// Whitened interference `N_{i,k} = Ē_k^{-1/2} B̄_{i,k} Ē_k^{-1/2}` and signal
/// `x_k = Ē_k^{-1/2} ā_k`.
struct Whitened {
    n: Vec<DMatrix<f64>>,
    x: Vec<DVector<f64>>,
    k: usize,
    j: usize,
}

impl Whitened {
    fn new(mom: &DeterministicMoments) -> Self {
        let k = mom.k;
        let mut n = Vec::with_capacity(k * k);
        for i in 0..k {
            for c in 0..k {
                let s = &mom.e_inv_sqrt[c];
                n.push(s * mom.b(i, c) * s);
            }
        }
        let x = (0..k).map(|c| &mom.e_inv_sqrt[c] * &mom.a_bar[c]).collect();
        Self { n, x, k, j: mom.j }
    }

    /// `A_k = Σ_{i≠k} (q_i/K) N_{i,k} + I/ρ`.
    fn a(&self, c: usize, q: &[f64], rho: f64) -> DMatrix<f64> {
        let kf = self.k as f64;
        let mut a = DMatrix::<f64>::identity(self.j, self.j) / rho;
        for i in (0..self.k).filter(|&i| i != c) {
            a += &self.n[i * self.k + c] * (q[i] / kf);
        }
        a
    }

    fn solve(&self, c: usize, q: &[f64], rho: f64) -> Result<DVector<f64>> {
        self.a(c, q, rho)
            .cholesky()
            .map(|ch| ch.solve(&self.x[c]))
            .ok_or_else(|| Error::Conditioning(format!("whitened interference of UE {c} is not positive definite")))
    }

    /// `ψ_k = x_k^T A_k^{-1} x_k`.
    fn psi(&self, q: &[f64], rho: f64) -> Result<Vec<f64>> {
        (0..self.k).map(|c| Ok(self.x[c].dot(&self.solve(c, q, rho)?))).collect()
    }
}

/// Dual powers and balanced level of the TPE receiver, from
/// `q_k = γ_k τ / ψ_k(q)`, `τ = K P_max / Σ γ_n / ψ_n(q)`.
pub fn solve_qtpe(
    mom: &DeterministicMoments,
    gamma: &[f64],
    rho: f64,
    p_max: f64,
    opts: SolverOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    let wh = Whitened::new(mom);
    solve_qtpe_whitened(&wh, gamma, rho, p_max, opts)
}

fn solve_qtpe_whitened(
    wh: &Whitened,
    gamma: &[f64],
    rho: f64,
    p_max: f64,
    opts: SolverOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    let k = wh.k;
    let kf = k as f64;
    if gamma.len() != k {
        return Err(Error::input("gamma must have K entries"));
    }
    if let Some(c) = (0..k).find(|&c| !(wh.x[c].norm() > 0.0)) {
        return Err(Error::Infeasible(format!("UE {c} has no deterministic signal component")));
    }
    let mut q = vec![p_max; k];
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut damped = false;
    for iter in 1..=opts.max_iter {
        let psi = wh.psi(&q, rho)?;
        let tau = kf * p_max / gamma.iter().zip(&psi).map(|(g, s)| g / s).sum::<f64>();
        let mut next: Vec<f64> = gamma.iter().zip(&psi).map(|(g, s)| g * tau / s).collect();
        if damped {
            for (n, o) in next.iter_mut().zip(&q) {
                *n = 0.5 * (*n + o);
            }
        }
        residual = next.iter().zip(&q).map(|(n, o)| ((n - o) / n).abs()).fold(0.0, f64::max);
        q = next;
        if residual <= opts.tol {
            let psi = wh.psi(&q, rho)?;
            let tau = kf * p_max / gamma.iter().zip(&psi).map(|(g, s)| g / s).sum::<f64>();
            return Ok((q, tau, iter));
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            damped |= stalled >= 5;
        }
    }
    Err(Error::Convergence { what: "TPE dual power fixed point", iterations: opts.max_iter, residual })
}

fn weights_whitened(wh: &Whitened, mom: &DeterministicMoments, q: &[f64], rho: f64) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let mut cs = Vec::with_capacity(wh.k);
    let mut ws = Vec::with_capacity(wh.k);
    for c in 0..wh.k {
        let v = wh.solve(c, q, rho)?;
        let c_star = &v / v.norm();
        ws.push(&mom.e_inv_sqrt[c] * &c_star);
        cs.push(c_star);
    }
    Ok((cs, ws))
}

/// `c*_k ∝ A_k^{-1} x_k` (unit norm) and `w_k = Ē_k^{-1/2} c*_k`.
pub fn optimal_weights(mom: &DeterministicMoments, q: &[f64], rho: f64) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    weights_whitened(&Whitened::new(mom), mom, q, rho)
}

/// Balancing data for downlink powers with fixed weights:
/// `Γ_k = γ_k w_k^T Ē_k w_k / (w_k^T ā_k)²` and `F_{k,i} = (1/K) w_i^T B̄_{k,i} w_i / w_i^T Ē_i w_i`.
fn dl_balance_terms(mom: &DeterministicMoments, weights: &[DVector<f64>], gamma: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let k = mom.k;
    let kf = k as f64;
    let norms: Vec<f64> = (0..k).map(|c| weights[c].dot(&(&mom.e_bar[c] * &weights[c]))).collect();
    let gd = (0..k)
        .map(|c| {
            let s = weights[c].dot(&mom.a_bar[c]);
            gamma[c] * norms[c] / (s * s)
        })
        .collect();
    let f = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            0.0
        } else {
            weights[c].dot(&(mom.b(r, c) * &weights[c])) / norms[c] / kf
        }
    });
    (gd, f)
}

/// Downlink powers that equalize the weighted deterministic SINRs at level `tau`.
pub fn tpe_dl_powers(mom: &DeterministicMoments, weights: &[DVector<f64>], gamma: &[f64], tau: f64, rho: f64) -> Result<Vec<f64>> {
    let (gd, f) = dl_balance_terms(mom, weights, gamma);
    balance_powers(&gd, &f, tau, rho)
}

/// Full TPE design: dual powers, weights, and downlink powers.
pub fn design_tpe(
    mom: &DeterministicMoments,
    gamma: &[f64],
    rho: f64,
    p_max: f64,
    opts: SolverOptions,
) -> Result<TpeSolution> {
    let wh = Whitened::new(mom);
    let (q, tau, iterations) = solve_qtpe_whitened(&wh, gamma, rho, p_max, opts)?;
    let (c_star, weights) = weights_whitened(&wh, mom, &q, rho)?;
    let p = tpe_dl_powers(mom, &weights, gamma, tau, rho)?;
    Ok(TpeSolution { c_star, weights, q, p, tau, iterations })
}

/// Deterministic SINRs of the polynomial transceiver with the given weights and
/// powers.
pub fn tpe_asymptotic_sinrs(
    mom: &DeterministicMoments,
    weights: &[DVector<f64>],
    powers: &[f64],
    rho: f64,
    link: Link,
) -> Vec<f64> {
    let k = mom.k;
    let kf = k as f64;
    let norms: Vec<f64> = (0..k).map(|c| weights[c].dot(&(&mom.e_bar[c] * &weights[c]))).collect();
    (0..k)
        .map(|c| {
            let w = &weights[c];
            let s = w.dot(&mom.a_bar[c]);
            match link {
                Link::Downlink => {
                    let interf: f64 = (0..k)
                        .filter(|&i| i != c)
                        .map(|i| powers[i] / kf * weights[i].dot(&(mom.b(c, i) * &weights[i])) / norms[i])
                        .sum();
                    powers[c] * s * s / norms[c] / (interf + 1.0 / rho)
                }
                Link::Uplink => {
                    let interf: f64 = (0..k)
                        .filter(|&i| i != c)
                        .map(|i| powers[i] / kf * w.dot(&(mom.b(i, c) * w)))
                        .sum();
                    powers[c] * s * s / (interf + norms[c] / rho)
                }
            }
        })
        .collect()
}

/// Deterministic average transmit power `(1/K) Σ_k w_k^T Ē_k w_k` of the unnormalized
/// polynomial beams.
pub fn tpe_average_power(mom: &DeterministicMoments, weights: &[DVector<f64>]) -> f64 {
    weights.iter().zip(&mom.e_bar).map(|(w, e)| w.dot(&(e * w))).sum::<f64>() / mom.k as f64
}

/// One weight vector shared by every UE: the per-UE optimal weights scaled to unit
/// norm with a positive leading entry, then averaged.
pub fn common_weights(weights: &[DVector<f64>]) -> DVector<f64> {
    let j = weights[0].len();
    let mut acc = DVector::<f64>::zeros(j);
    for w in weights {
        let s = if w[0] < 0.0 { -1.0 } else { 1.0 };
        acc += w * (s / w.norm());
    }
    acc / weights.len() as f64
}

/// Downlink powers for fixed weights that balance the weighted deterministic SINRs
/// and spend `Σ p = K P_max`, found by bisection on the balanced level.
pub fn balanced_dl_powers_fixed_weights(
    mom: &DeterministicMoments,
    weights: &[DVector<f64>],
    gamma: &[f64],
    rho: f64,
    p_max: f64,
) -> Result<(Vec<f64>, f64)> {
    let (gd, f) = dl_balance_terms(mom, weights, gamma);
    let budget = mom.k as f64 * p_max;
    let total = |tau: f64| balance_powers(&gd, &f, tau, rho).map(|p| (p.iter().sum::<f64>(), p));
    let mut lo = 0.0;
    let mut hi = 1e-6;
    loop {
        match total(hi) {
            Ok((s, _)) if s < budget => {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::Infeasible("power budget is never reached".into()));
                }
            }
            _ => break,
        }
    }
    let mut best = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match total(mid) {
            Ok((s, p)) if s <= budget => {
                lo = mid;
                best = Some(p);
            }
            _ => hi = mid,
        }
    }
    match best {
        Some(p) => Ok((p, lo)),
        None => total(lo)
            .map(|(_, p)| (p, lo))
            .map_err(|_| Error::Infeasible("no feasible balanced power allocation".into())),
    }
}
