//! Large-system deterministic equivalents of the exact transceiver and the
//! asymptotically optimal power allocations (A-OLP/A-OLR).
//!
//! Everything here depends only on the priorities, the path-loss gains, the
//! dimensions and the CSI quality; nothing is drawn at random.

use crate::error::{Error, Result};
use crate::Link;

/// Deterministic minimum weighted SINR, dual UL and DL powers, and the
/// interference constants ξ and μ_k.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticParams {
    pub tau_bar: f64,
    pub q_bar: Vec<f64>,
    pub p_bar: Vec<f64>,
    pub xi: f64,
    pub mu: Vec<f64>,
}

impl AsymptoticParams {
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        gamma: &[f64],
        beta: &[f64],
        etas: &[f64],
        m: usize,
        k: usize,
        rho: f64,
        p_max: f64,
    ) -> Result<Self> {
        let tau_bar = solve_tau_bar(gamma, beta, m, k, rho, p_max, 1e-12)?;
        let q = q_bar(gamma, beta, p_max);
        let (xi, mu) = xi_and_mu(gamma, tau_bar, etas, m, k);
        let mut params = Self { tau_bar, q_bar: q, p_bar: Vec::new(), xi, mu };
        params.p_bar = p_bar(&params, gamma, beta, rho, p_max);
        Ok(params)
    }
}

fn mean_gamma_over_beta(gamma: &[f64], beta: &[f64]) -> f64 {
    gamma.iter().zip(beta).map(|(g, b)| g / b).sum::<f64>() / gamma.len() as f64
}

/// Right-hand side of the τ̄ fixed point; strictly decreasing in `tau`.
pub fn tau_bar_rhs(gamma: &[f64], beta: &[f64], m: usize, k: usize, rho: f64, p_max: f64, tau: f64) -> f64 {
    let kf = k as f64;
    let load = gamma.iter().map(|g| g * tau / (1.0 + g * tau)).sum::<f64>() / kf;
    rho * p_max / mean_gamma_over_beta(gamma, beta) * (m as f64 / kf - load)
}

/// Unique positive root of `τ = RHS(τ)` by bisection.
///
/// `tol` bounds the residual `|τ − RHS(τ)|` relative to `max(1, τ)`.
pub fn solve_tau_bar(
    gamma: &[f64],
    beta: &[f64],
    m: usize,
    k: usize,
    rho: f64,
    p_max: f64,
    tol: f64,
) -> Result<f64> {
    if k == 0 || k >= m {
        return Err(Error::input(format!("need 0 < K < M, got K = {k}, M = {m}")));
    }
    if gamma.len() != k || beta.len() != k {
        return Err(Error::input("gamma and beta must have K entries"));
    }
    if beta.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::input("path-loss gains must be positive"));
    }
    let g = |t: f64| t - tau_bar_rhs(gamma, beta, m, k, rho, p_max, t);

    // g(0) < 0; RHS(τ) ≤ RHS(0), so g > 0 beyond RHS(0).
    let mut lo = 0.0;
    let mut hi = tau_bar_rhs(gamma, beta, m, k, rho, p_max, 0.0).max(f64::MIN_POSITIVE);
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Convergence { what: "tau_bar bracket", iterations: 0, residual: f64::INFINITY });
        }
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let tau = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let residual = g(tau).abs();
    if residual > tol * tau.max(1.0) {
        return Err(Error::Convergence { what: "tau_bar bisection", iterations, residual });
    }
    Ok(tau)
}

/// `q̄_k = (γ_k/β_k) P_max / ((1/K) Σ γ_i/β_i)`; also the A-OLR uplink powers.
pub fn q_bar(gamma: &[f64], beta: &[f64], p_max: f64) -> Vec<f64> {
    let mean = mean_gamma_over_beta(gamma, beta);
    gamma.iter().zip(beta).map(|(g, b)| g / b * p_max / mean).collect()
}

/// ξ and the per-UE interference factors μ_k.
pub fn xi_and_mu(gamma: &[f64], tau_bar: f64, etas: &[f64], m: usize, k: usize) -> (f64, Vec<f64>) {
    let kf = k as f64;
    let xi = m as f64 / kf
        - gamma
            .iter()
            .map(|g| {
                let x = g * tau_bar;
                x * x / ((1.0 + x) * (1.0 + x))
            })
            .sum::<f64>()
            / kf;
    let mu = gamma
        .iter()
        .zip(etas)
        .map(|(g, eta)| {
            let x = g * tau_bar;
            let e2 = eta * eta;
            (1.0 + 2.0 * e2 * x + e2 * x * x) / ((1.0 + x) * (1.0 + x))
        })
        .collect();
    (xi, mu)
}

/// Deterministic equivalent of the OLP downlink powers.
pub fn p_bar(params: &AsymptoticParams, gamma: &[f64], beta: &[f64], rho: f64, p_max: f64) -> Vec<f64> {
    let t = params.tau_bar;
    gamma
        .iter()
        .zip(beta)
        .map(|(g, b)| {
            let x = 1.0 + g * t;
            g / b * t / params.xi * (b * p_max / (x * x) + 1.0 / rho)
        })
        .collect()
}

/// Deterministic DL SINRs of the plug-in OLP.
pub fn asym_dl_sinr(params: &AsymptoticParams, beta: &[f64], rho: f64, p_max: f64, etas: &[f64]) -> Vec<f64> {
    (0..beta.len())
        .map(|k| {
            let e2 = etas[k] * etas[k];
            params.p_bar[k] * (1.0 - e2) * params.xi / (params.mu[k] * p_max + 1.0 / (rho * beta[k]))
        })
        .collect()
}

/// Deterministic UL SINRs of the plug-in OLR.
pub fn asym_ul_sinr(params: &AsymptoticParams, beta: &[f64], rho: f64, etas: &[f64]) -> Vec<f64> {
    asym_sinr_given_powers(&params.q_bar, Link::Uplink, params, beta, rho, etas)
}

/// Deterministic SINRs for the asymptotic directions with arbitrary powers.
pub fn asym_sinr_given_powers(
    powers: &[f64],
    link: Link,
    params: &AsymptoticParams,
    beta: &[f64],
    rho: f64,
    etas: &[f64],
) -> Vec<f64> {
    let kf = powers.len() as f64;
    let total: f64 = powers.iter().sum();
    // (1/K) Σ_i β_i μ_i x_i, the uplink interference before the 1/β_k scaling
    let ul_load: f64 = (0..powers.len()).map(|i| beta[i] * params.mu[i] * powers[i]).sum::<f64>() / kf;
    (0..powers.len())
        .map(|k| {
            let e2 = etas[k] * etas[k];
            let noise = 1.0 / (rho * beta[k]);
            let interference = match link {
                Link::Downlink => params.mu[k] * total / kf,
                Link::Uplink => ul_load / beta[k],
            };
            powers[k] * (1.0 - e2) * params.xi / (interference + noise)
        })
        .collect()
}

/// A-OLP downlink and A-OLR uplink powers.
#[derive(Debug, Clone, PartialEq)]
pub struct AolpPowers {
    pub p_tilde: Vec<f64>,
    pub q_tilde: Vec<f64>,
}

/// Powers maximizing the minimum deterministic weighted SINR for the asymptotic
/// directions.
pub fn aolp_powers(gamma: &[f64], beta: &[f64], mu: &[f64], rho: f64, p_max: f64) -> AolpPowers {
    let kf = gamma.len() as f64;
    let num: Vec<f64> = (0..gamma.len())
        .map(|k| p_max * gamma[k] * mu[k] + gamma[k] / (rho * beta[k]))
        .collect();
    let den = num.iter().sum::<f64>() / (kf * p_max);
    AolpPowers { p_tilde: num.iter().map(|n| n / den).collect(), q_tilde: q_bar(gamma, beta, p_max) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn het(k: usize) -> (Vec<f64>, Vec<f64>) {
        let gamma = (0..k).map(|i| 1.0 + ((i * 7) % 10) as f64 / 10.0).collect();
        let beta = (0..k).map(|i| 10f64.powf(-3.0 * i as f64 / k as f64)).collect();
        (gamma, beta)
    }

    #[test]
    fn tau_bar_homogeneous_quadratic() {
        let (m, k, rho, p) = (128, 32, 100.0, 5.0);
        let t = solve_tau_bar(&vec![1.0; k], &vec![1.0; k], m, k, rho, p, 1e-12).unwrap();
        // τ² − 1499τ − 2000 = 0
        let root = (1499.0 + (1499.0f64 * 1499.0 + 8000.0).sqrt()) / 2.0;
        assert!((t / root - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tau_bar_residual_and_monotone_in_power() {
        let (gamma, beta) = het(16);
        let mut prev = f64::INFINITY;
        for p in [10.0, 1.0, 1e-2, 1e-4, 1e-8] {
            let t = solve_tau_bar(&gamma, &beta, 48, 16, 100.0, p, 1e-12).unwrap();
            let r = (t - tau_bar_rhs(&gamma, &beta, 48, 16, 100.0, p, t)).abs();
            assert!(r < 1e-12 * t.max(1.0));
            assert!(t < prev && t > 0.0);
            prev = t;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn q_bar_properties() {
        assert_eq!(q_bar(&[2.0], &[0.1], 3.0), vec![3.0]);
        let q = q_bar(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0], 3.0);
        assert!(q.iter().all(|v| (v - 3.0).abs() < 1e-14));

        let (mut gamma, beta) = het(6);
        let before = q_bar(&gamma, &beta, 2.0);
        gamma[2] *= 2.0;
        let after = q_bar(&gamma, &beta, 2.0);
        for i in 0..6 {
            if i == 2 {
                assert!(after[i] > before[i]);
            } else {
                assert!(after[i] < before[i]);
            }
        }
        assert!((after.iter().sum::<f64>() / 6.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn xi_mu_limits() {
        let (gamma, _) = het(8);
        let (xi, mu1) = xi_and_mu(&gamma, 3.0, &[1.0; 8], 24, 8);
        assert!(xi > 24.0 / 8.0 - 1.0);
        assert!(mu1.iter().all(|m| (m - 1.0).abs() < 1e-14));
        let (_, mu0) = xi_and_mu(&gamma, 3.0, &[0.0; 8], 24, 8);
        for (m, g) in mu0.iter().zip(&gamma) {
            assert!((m - 1.0 / ((1.0 + 3.0 * g) * (1.0 + 3.0 * g))).abs() < 1e-15);
        }
    }

    #[test]
    fn p_bar_budget_and_symmetry() {
        let (gamma, beta) = het(12);
        let params = AsymptoticParams::compute(&gamma, &beta, &[0.3; 12], 40, 12, 100.0, 5.0).unwrap();
        assert!(params.p_bar.iter().all(|p| *p > 0.0));
        assert!((params.p_bar.iter().sum::<f64>() / 12.0 - 5.0).abs() < 1e-10);
        assert!((params.q_bar.iter().sum::<f64>() / 12.0 - 5.0).abs() < 1e-10);

        let hom = AsymptoticParams::compute(&[1.5; 4], &[0.2; 4], &[0.0; 4], 10, 4, 10.0, 1.0).unwrap();
        assert!(hom.p_bar.iter().all(|p| (p - hom.p_bar[0]).abs() < 1e-14));
    }

    #[test]
    fn corollary_perfect_csi() {
        let (gamma, beta) = het(10);
        let etas = [0.0; 10];
        let params = AsymptoticParams::compute(&gamma, &beta, &etas, 30, 10, 100.0, 2.0).unwrap();
        let dl = asym_dl_sinr(&params, &beta, 100.0, 2.0, &etas);
        let ul = asym_ul_sinr(&params, &beta, 100.0, &etas);
        for k in 0..10 {
            assert!((dl[k] / gamma[k] / params.tau_bar - 1.0).abs() < 1e-12);
            assert!((ul[k] / gamma[k] / params.tau_bar - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sinr_decreasing_in_eta() {
        let (gamma, beta) = het(6);
        let mut prev_dl = vec![f64::INFINITY; 6];
        let mut prev_ul = vec![f64::INFINITY; 6];
        for i in 0..=10 {
            let eta = i as f64 / 10.0;
            let etas = [eta; 6];
            let params = AsymptoticParams::compute(&gamma, &beta, &etas, 20, 6, 100.0, 1.0).unwrap();
            let dl = asym_dl_sinr(&params, &beta, 100.0, 1.0, &etas);
            let ul = asym_ul_sinr(&params, &beta, 100.0, &etas);
            for k in 0..6 {
                assert!(dl[k] < prev_dl[k] && ul[k] < prev_ul[k] || eta == 1.0 && dl[k] == 0.0);
            }
            if eta == 1.0 {
                assert!(dl.iter().chain(&ul).all(|s| *s == 0.0));
            }
            prev_dl = dl;
            prev_ul = ul;
        }
    }

    #[test]
    fn sinr_given_powers() {
        let (gamma, beta) = het(5);
        let etas = [0.4; 5];
        let params = AsymptoticParams::compute(&gamma, &beta, &etas, 15, 5, 100.0, 3.0).unwrap();
        let via_powers = asym_sinr_given_powers(&params.p_bar, Link::Downlink, &params, &beta, 100.0, &etas);
        let direct = asym_dl_sinr(&params, &beta, 100.0, 3.0, &etas);
        for k in 0..5 {
            assert!((via_powers[k] / direct[k] - 1.0).abs() < 1e-12);
        }
        let zero = asym_sinr_given_powers(&[0.0; 5], Link::Uplink, &params, &beta, 100.0, &etas);
        assert!(zero.iter().all(|s| *s == 0.0));
        for link in [Link::Downlink, Link::Uplink] {
            let base = asym_sinr_given_powers(&params.p_bar, link, &params, &beta, 100.0, &etas);
            let scaled: Vec<f64> = params.p_bar.iter().map(|p| p * 1.5).collect();
            let up = asym_sinr_given_powers(&scaled, link, &params, &beta, 100.0, &etas);
            assert!(base.iter().zip(&up).all(|(a, b)| b > a));
        }
    }

    #[test]
    fn single_ue_dl_ul_consistent() {
        let params = AsymptoticParams::compute(&[1.4], &[0.3], &[0.0], 8, 1, 50.0, 2.0).unwrap();
        let dl = asym_dl_sinr(&params, &[0.3], 50.0, 2.0, &[0.0])[0];
        let ul = asym_ul_sinr(&params, &[0.3], 50.0, &[0.0])[0];
        assert!((dl / ul - 1.0).abs() < 1e-12);
        // with one UE both reduce to ρ β P ξ / (μ ρ β P + 1)
        let mu = params.mu[0];
        let expect = 50.0 * 0.3 * 2.0 * params.xi / (mu * 50.0 * 0.3 * 2.0 + 1.0);
        assert!((dl / expect - 1.0).abs() < 1e-12);
    }

    /// Power iteration on D (f 1^T + c 1 1^T), independent of the closed form.
    fn perron_vector(gamma: &[f64], beta: &[f64], mu: &[f64], xi: f64, eta: f64, rho: f64, p_max: f64) -> Vec<f64> {
        let k = gamma.len();
        let kf = k as f64;
        let c = 1.0 / (rho * kf * p_max);
        let a: Vec<Vec<f64>> = (0..k)
            .map(|r| {
                let d = gamma[r] / (xi * beta[r] * (1.0 - eta * eta));
                (0..k).map(|_| d * (beta[r] * mu[r] / kf + c)).collect()
            })
            .collect();
        let mut x = vec![1.0; k];
        for _ in 0..200 {
            let y: Vec<f64> = (0..k).map(|r| (0..k).map(|c| a[r][c] * x[c]).sum()).collect();
            let s: f64 = y.iter().sum();
            x = y.iter().map(|v| v / s).collect();
        }
        x
    }

    #[test]
    fn aolp_powers_properties() {
        let k = 8;
        let (gamma, beta) = het(k);
        let eta = 0.5;
        let etas = vec![eta; k];
        let (rho, p) = (100.0, 5.0);
        let params = AsymptoticParams::compute(&gamma, &beta, &etas, 24, k, rho, p).unwrap();
        let a = aolp_powers(&gamma, &beta, &params.mu, rho, p);
        assert!((a.p_tilde.iter().sum::<f64>() / k as f64 - p).abs() < 1e-12);
        assert_eq!(a.q_tilde, params.q_bar);

        let perron = perron_vector(&gamma, &beta, &params.mu, params.xi, eta, rho, p);
        let scale = a.p_tilde[0] / perron[0];
        for i in 0..k {
            assert!((a.p_tilde[i] / (perron[i] * scale) - 1.0).abs() < 1e-12);
        }

        let w = asym_sinr_given_powers(&a.p_tilde, Link::Downlink, &params, &beta, rho, &etas);
        let first = w[0] / gamma[0];
        assert!(w.iter().zip(&gamma).all(|(s, g)| (s / g / first - 1.0).abs() < 1e-12));
    }

    #[test]
    fn aolp_matches_olp_at_perfect_csi() {
        let k = 10;
        let (gamma, beta) = het(k);
        let params = AsymptoticParams::compute(&gamma, &beta, &vec![0.0; k], 30, k, 100.0, 5.0).unwrap();
        let a = aolp_powers(&gamma, &beta, &params.mu, 100.0, 5.0);
        for i in 0..k {
            assert!((a.p_tilde[i] - params.p_bar[i]).abs() < 1e-10);
        }
    }

    /// The scalar resolvent fixed point `μ = (M/K) (1/ρ + (1/K) Σ α_i/(1 + α_i μ))^{-1}`
    /// with `α_i = q̄_i β_i`, solved directly, must satisfy `μ α_k = γ_k τ̄`.
    #[test]
    fn resolvent_scalar_cross_check() {
        let (k, m, rho, p) = (12, 40, 31.0, 2.5);
        let (gamma, beta) = het(k);
        let tau = solve_tau_bar(&gamma, &beta, m, k, rho, p, 1e-13).unwrap();
        let alphas: Vec<f64> = q_bar(&gamma, &beta, p).iter().zip(&beta).map(|(q, b)| q * b).collect();
        let map = |mu: f64| {
            let s: f64 = alphas.iter().map(|a| a / (1.0 + a * mu)).sum::<f64>() / k as f64;
            m as f64 / k as f64 / (1.0 / rho + s)
        };
        let mut mu = 1.0;
        for _ in 0..10_000 {
            mu = 0.5 * (mu + map(mu));
        }
        assert!((map(mu) / mu - 1.0).abs() < 1e-14);
        for i in 0..k {
            assert!((mu * alphas[i] / (gamma[i] * tau) - 1.0).abs() < 1e-10);
        }
    }
}
