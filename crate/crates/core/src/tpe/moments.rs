//! Deterministic equivalents of the TPE moment vectors and matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{expand_delta, BiJet, DeltaExpansion, Jet};
use crate::linalg::sym_inv_sqrt;

/// `ā_k`, `Ē_k`, `B̄_{k,i}` and the series they are read from.
#[derive(Debug, Clone)]
pub struct DeterministicMoments {
    pub j: usize,
    pub k: usize,
    pub a_bar: Vec<DVector<f64>>,
    pub e_bar: Vec<DMatrix<f64>>,
    /// `b_bar[k * K + i]` is `B̄_{k,i}`: interference of UE i's beam at UE k.
    pub b_bar: Vec<DMatrix<f64>>,
    /// `Ē_k^{-1/2}`.
    pub e_inv_sqrt: Vec<DMatrix<f64>>,
    pub delta: DeltaExpansion,
    /// `X̄_k(t) = β_k δ(t) / (1 + t q̄_k β_k δ(t))` to order 2(J − 1).
    pub x_bar: Vec<Jet>,
    /// `ᾱ(t, u)` to order J − 1 in each variable.
    pub alpha_bar: BiJet,
    pub etas: Vec<f64>,
    attenuation_grids: Vec<BiJet>,
}

impl DeterministicMoments {
    pub fn b(&self, k: usize, i: usize) -> &DMatrix<f64> {
        &self.b_bar[k * self.k + i]
    }

    /// `f̄_k(t, u) = β_k (η_k² + (1 − η_k²) / ((1 + q̄_kβ_k t δ(t))(1 + q̄_kβ_k u δ(u))))`.
    pub fn f_bar(&self, k: usize) -> BiJet {
        let e2 = self.etas[k] * self.etas[k];
        self.attenuation_grids[k].scale(1.0 - e2).add_scalar(e2).scale(self.delta.beta[k])
    }

    /// `Z̄_{k,i}(t, u) = β_i f̄_k ᾱ / ((1 + tδ(t)β_i q̄_i)(1 + uδ(u)β_i q̄_i))`.
    pub fn z_bar(&self, k: usize, i: usize) -> BiJet {
        let p = &self.alpha_bar * &self.attenuation_grids[i];
        (&self.f_bar(k) * &p).scale(self.delta.beta[i])
    }
}

fn truncate(j: &Jet, order: usize) -> Jet {
    Jet::new(j.coeffs()[..=order].to_vec())
}

fn sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Builds every deterministic moment for truncation order `j`.
pub fn build_deterministic_moments(
    beta: &[f64],
    q_bar: &[f64],
    etas: &[f64],
    m: usize,
    k: usize,
    j: usize,
) -> Result<DeterministicMoments> {
    if j == 0 {
        return Err(Error::input("truncation order J must be at least 1"));
    }
    if etas.len() != k {
        return Err(Error::input("eta must have K entries"));
    }
    let order = 2 * (j - 1);
    let delta = expand_delta(q_bar, beta, m, k, order)?;
    let loads: Vec<f64> = delta.loads().collect();
    let atten: Vec<Jet> = loads.iter().map(|a| delta.attenuation(*a)).collect();

    let x_bar: Vec<Jet> = (0..k).map(|c| (&delta.delta * &atten[c]).scale(beta[c])).collect();

    let a_bar = (0..k)
        .map(|c| {
            let s = (1.0 - etas[c] * etas[c]).sqrt();
            DVector::from_fn(j, |l, _| sign(l) * s * x_bar[c].coeff(l))
        })
        .collect();
    let e_bar: Vec<DMatrix<f64>> = (0..k)
        .map(|c| DMatrix::from_fn(j, j, |l, n| sign(l + n) * x_bar[c].coeff(l + n)))
        .collect();
    let e_inv_sqrt = e_bar
        .iter()
        .enumerate()
        .map(|(c, e)| {
            sym_inv_sqrt(e).map_err(|err| match err {
                Error::Conditioning(msg) => Error::Conditioning(format!("E_bar of UE {c}: {msg}; J = {j} may be too large")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Bivariate pieces only need order J − 1 per variable.
    let bo = j - 1;
    let d_short = truncate(&delta.delta, bo);
    let grids: Vec<BiJet> = atten
        .iter()
        .map(|g| {
            let g = truncate(g, bo);
            BiJet::outer(&g, &g)
        })
        .collect();
    let kf = k as f64;
    let mut coupling = BiJet::constant(0.0, bo);
    for (c, g) in atten.iter().enumerate() {
        let tdg = (&d_short * &truncate(g, bo)).shift();
        coupling = &coupling + &BiJet::outer(&tdg, &tdg).scale(loads[c] * loads[c] / kf);
    }
    let denom = coupling.scale(-1.0).add_scalar(m as f64 / kf);
    let alpha_bar = &BiJet::outer(&d_short, &d_short) * &denom.reciprocal()?;

    let mut moments = DeterministicMoments {
        j,
        k,
        a_bar,
        e_bar,
        b_bar: Vec::with_capacity(k * k),
        e_inv_sqrt,
        delta,
        x_bar,
        alpha_bar,
        etas: etas.to_vec(),
        attenuation_grids: grids,
    };

    let shared: Vec<BiJet> = (0..k).map(|i| &moments.alpha_bar * &moments.attenuation_grids[i]).collect();
    for kk in 0..k {
        let f = moments.f_bar(kk);
        for (i, p) in shared.iter().enumerate() {
            let z = (&f * p).scale(beta[i]);
            moments.b_bar.push(DMatrix::from_fn(j, j, |l, n| sign(l + n) * z.coeff(l, n)));
        }
    }
    Ok(moments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(k: usize) -> (Vec<f64>, Vec<f64>) {
        let beta: Vec<f64> = (0..k).map(|i| 0.1 + 0.8 * i as f64 / k as f64).collect();
        let q: Vec<f64> = (0..k).map(|i| 1.0 + (i % 3) as f64 * 0.5).collect();
        (beta, q)
    }

    #[test]
    fn order_one_closed_forms() {
        let (beta, q) = setup(4);
        let etas = [0.3; 4];
        let mom = build_deterministic_moments(&beta, &q, &etas, 12, 4, 1).unwrap();
        for k in 0..4 {
            let s = (1.0f64 - 0.09).sqrt();
            assert!((mom.a_bar[k][0] - s * beta[k] * 3.0).abs() < 1e-14);
            assert!((mom.e_bar[k][(0, 0)] - beta[k] * 3.0).abs() < 1e-14);
            for i in 0..4 {
                assert!((mom.b(k, i)[(0, 0)] - beta[i] * beta[k] * 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn statistics_only_csi_kills_signal() {
        let (beta, q) = setup(3);
        let mom = build_deterministic_moments(&beta, &q, &[1.0; 3], 9, 3, 3).unwrap();
        assert!(mom.a_bar.iter().all(|a| a.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn e_bar_positive_definite_and_symmetric_b() {
        let (beta, q) = setup(6);
        let mom = build_deterministic_moments(&beta, &q, &[0.2; 6], 24, 6, 3).unwrap();
        for e in &mom.e_bar {
            let min = e.clone().symmetric_eigen().eigenvalues.min();
            assert!(min > 0.0);
        }
        for b in &mom.b_bar {
            assert!((b - b.transpose()).norm() < 1e-12 * b.norm());
        }
    }

    /// Direct evaluation of δ, ᾱ at a point by fixed-point iteration.
    fn delta_direct(alphas: &[f64], ratio: f64, t: f64) -> f64 {
        let k = alphas.len() as f64;
        let mut d = ratio;
        for _ in 0..100_000 {
            let s: f64 = alphas.iter().map(|a| a / (1.0 + t * d * a)).sum();
            let next = ratio / (1.0 + t / k * s);
            if (next - d).abs() < 1e-16 * d {
                return next;
            }
            d = 0.5 * (d + next);
        }
        d
    }

    #[test]
    fn alpha_bar_pointwise() {
        let (beta, q) = setup(5);
        let mom = build_deterministic_moments(&beta, &q, &[0.0; 5], 15, 5, 6).unwrap();
        let alphas: Vec<f64> = beta.iter().zip(&q).map(|(b, q)| b * q).collect();
        let (t, u) = (0.002, 0.004);
        let (dt, du) = (delta_direct(&alphas, 3.0, t), delta_direct(&alphas, 3.0, u));
        let s: f64 = alphas.iter().map(|a| a * a / ((1.0 + t * a * dt) * (1.0 + u * a * du))).sum();
        let direct = dt * du / (3.0 - t * u / 5.0 * dt * du * s);
        assert!((mom.alpha_bar.eval(t, u) - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn x_bar_and_z_bar_match_finite_differences() {
        let (beta, q) = setup(4);
        let etas = [0.4; 4];
        let mom = build_deterministic_moments(&beta, &q, &etas, 16, 4, 3).unwrap();
        let alphas: Vec<f64> = beta.iter().zip(&q).map(|(b, q)| b * q).collect();
        let x = |k: usize, t: f64| {
            let d = delta_direct(&alphas, 4.0, t);
            beta[k] * d / (1.0 + t * alphas[k] * d)
        };
        let h = 1e-4;
        for k in 0..4 {
            let d1 = (x(k, h) - x(k, -h)) / (2.0 * h);
            let d2 = (x(k, h) - 2.0 * x(k, 0.0) + x(k, -h)) / (h * h);
            assert!((mom.x_bar[k].derivative(1) / d1 - 1.0).abs() < 1e-6);
            assert!((mom.x_bar[k].derivative(2) / d2 - 1.0).abs() < 1e-5);
        }
        let z = |k: usize, i: usize, t: f64, u: f64| {
            let (dt, du) = (delta_direct(&alphas, 4.0, t), delta_direct(&alphas, 4.0, u));
            let s: f64 = alphas.iter().map(|a| a * a / ((1.0 + t * a * dt) * (1.0 + u * a * du))).sum();
            let al = dt * du / (4.0 - t * u / 4.0 * dt * du * s);
            let e2 = etas[k] * etas[k];
            let f = beta[k] * (e2 + (1.0 - e2) / ((1.0 + alphas[k] * t * dt) * (1.0 + alphas[k] * u * du)));
            beta[i] * f * al / ((1.0 + t * dt * alphas[i]) * (1.0 + u * du * alphas[i]))
        };
        let (k, i) = (1, 3);
        let zb = mom.z_bar(k, i);
        let mixed = (z(k, i, h, h) - z(k, i, h, -h) - z(k, i, -h, h) + z(k, i, -h, -h)) / (4.0 * h * h);
        assert!((zb.derivative(1, 1) / mixed - 1.0).abs() < 1e-5);
        let dt = (z(k, i, h, 0.0) - z(k, i, -h, 0.0)) / (2.0 * h);
        assert!((zb.derivative(1, 0) / dt - 1.0).abs() < 1e-6);
        assert!((mom.b(k, i)[(1, 1)] - zb.coeff(1, 1)).abs() < 1e-15);
        assert!((mom.b(k, i)[(0, 1)] + zb.coeff(0, 1)).abs() < 1e-15);
    }
}
