//! Truncated Taylor series in one and two variables.
//!
//! A [`Jet`] of order N stores `c_0..c_N` with `f(t) = Σ c_n t^n + O(t^{N+1})`;
//! coefficients are Taylor coefficients, so `f^{(n)}(0) = n!·c_n`. A [`BiJet`]
//! stores `c_{ℓ,m}` for `ℓ, m ≤ N` and truncates each variable separately.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least a constant term");
        Self { coeffs }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The identity series `t`.
    pub fn variable(order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        if order > 0 {
            coeffs[1] = 1.0;
        }
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs[n]
    }

    /// `f^{(n)}(0)`.
    pub fn derivative(&self, n: usize) -> f64 {
        self.coeffs[n] * factorial(n)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Multiplies by `t`, dropping the term pushed past the order.
    pub fn shift(&self) -> Self {
        let n = self.coeffs.len();
        let mut coeffs = vec![0.0; n];
        coeffs[1..].copy_from_slice(&self.coeffs[..n - 1]);
        Self { coeffs }
    }

    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::Domain(format!("reciprocal of a series with constant term {a0}")));
        }
        let n = self.coeffs.len();
        let mut b = vec![0.0; n];
        b[0] = 1.0 / a0;
        for i in 1..n {
            let s: f64 = (1..=i).map(|j| self.coeffs[j] * b[i - j]).sum();
            b[i] = -s / a0;
        }
        Ok(Self { coeffs: b })
    }

    pub fn sqrt(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if !(a0 > 0.0) {
            return Err(Error::Domain(format!("square root of a series with constant term {a0}")));
        }
        let n = self.coeffs.len();
        let mut b = vec![0.0; n];
        b[0] = a0.sqrt();
        for i in 1..n {
            let s: f64 = (1..i).map(|j| b[j] * b[i - j]).sum();
            b[i] = (self.coeffs[i] - s) / (2.0 * b[0]);
        }
        Ok(Self { coeffs: b })
    }

    /// Sums the truncated series at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    fn check_order(&self, other: &Self) {
        assert_eq!(self.coeffs.len(), other.coeffs.len(), "jet orders differ");
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check_order(rhs);
        Jet { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check_order(rhs);
        Jet { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.check_order(rhs);
        let n = self.coeffs.len();
        let coeffs = (0..n)
            .map(|i| (0..=i).map(|j| self.coeffs[j] * rhs.coeffs[i - j]).sum())
            .collect();
        Jet { coeffs }
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiJet {
    order: usize,
    /// Row-major: `coeffs[ℓ * (order + 1) + m]` multiplies `t^ℓ u^m`.
    coeffs: Vec<f64>,
}

impl BiJet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; (order + 1) * (order + 1)];
        coeffs[0] = value;
        Self { order, coeffs }
    }

    pub fn from_fn(order: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let w = order + 1;
        Self { order, coeffs: (0..w * w).map(|i| f(i / w, i % w)).collect() }
    }

    /// `f(t)·g(u)`.
    pub fn outer(f: &Jet, g: &Jet) -> Self {
        assert_eq!(f.order(), g.order(), "jet orders differ");
        Self::from_fn(f.order(), |l, m| f.coeff(l) * g.coeff(m))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, l: usize, m: usize) -> f64 {
        self.coeffs[l * (self.order + 1) + m]
    }

    /// `∂_t^ℓ ∂_u^m g(0, 0)`.
    pub fn derivative(&self, l: usize, m: usize) -> f64 {
        self.coeff(l, m) * factorial(l) * factorial(m)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { order: self.order, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::Domain(format!("reciprocal of a series with constant term {a0}")));
        }
        let w = self.order + 1;
        let mut b = vec![0.0; w * w];
        for l in 0..w {
            for m in 0..w {
                let mut s = if l == 0 && m == 0 { 1.0 } else { 0.0 };
                for i in 0..=l {
                    for j in 0..=m {
                        if i == 0 && j == 0 {
                            continue;
                        }
                        s -= self.coeffs[i * w + j] * b[(l - i) * w + (m - j)];
                    }
                }
                b[l * w + m] = s / a0;
            }
        }
        Ok(Self { order: self.order, coeffs: b })
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let w = self.order + 1;
        (0..w)
            .rev()
            .fold(0.0, |acc, l| acc * t + (0..w).rev().fold(0.0, |a, m| a * u + self.coeffs[l * w + m]))
    }

    fn check_order(&self, other: &Self) {
        assert_eq!(self.order, other.order, "bijet orders differ");
    }
}

impl Add for &BiJet {
    type Output = BiJet;
    fn add(self, rhs: &BiJet) -> BiJet {
        self.check_order(rhs);
        BiJet { order: self.order, coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &BiJet {
    type Output = BiJet;
    fn sub(self, rhs: &BiJet) -> BiJet {
        self.check_order(rhs);
        BiJet { order: self.order, coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &BiJet {
    type Output = BiJet;
    fn mul(self, rhs: &BiJet) -> BiJet {
        self.check_order(rhs);
        let w = self.order + 1;
        let mut c = vec![0.0; w * w];
        for i in 0..w {
            for j in 0..w {
                let a = self.coeffs[i * w + j];
                if a == 0.0 {
                    continue;
                }
                for l in i..w {
                    for m in j..w {
                        c[l * w + m] += a * rhs.coeffs[(l - i) * w + (m - j)];
                    }
                }
            }
        }
        BiJet { order: self.order, coeffs: c }
    }
}

/// Taylor expansion of the positive solution δ(t) of
/// `δ(t) = (M/K) / (1 + (t/K) Σ_i α_i / (1 + t δ(t) α_i))`, with `α_i = β_i q̄_i`.
#[derive(Debug, Clone)]
pub struct DeltaExpansion {
    pub delta: Jet,
    pub q_bar: Vec<f64>,
    pub beta: Vec<f64>,
    pub ratio: f64,
}

impl DeltaExpansion {
    /// Per-UE loads `α_i = β_i q̄_i`.
    pub fn loads(&self) -> impl Iterator<Item = f64> + '_ {
        self.q_bar.iter().zip(&self.beta).map(|(q, b)| q * b)
    }

    /// `1 / (1 + t δ(t) α)`.
    pub fn attenuation(&self, alpha: f64) -> Jet {
        self.delta.shift().scale(alpha).add_scalar(1.0).reciprocal().expect("constant term is 1")
    }

    /// `δ(t)·(1 + (t/K) Σ α_i/(1 + t δ α_i)) − M/K`; zero up to rounding.
    pub fn residual(&self) -> Jet {
        let order = self.delta.order();
        let k = self.q_bar.len() as f64;
        let mut sum = Jet::constant(0.0, order);
        for a in self.loads() {
            sum = &sum + &self.attenuation(a).scale(a);
        }
        let bracket = sum.shift().scale(1.0 / k).add_scalar(1.0);
        (&self.delta * &bracket).add_scalar(-self.ratio)
    }
}

/// Solves for δ(t) order by order.
///
/// Every occurrence of δ inside the sum carries a factor t, so coefficient n of
/// the right-hand side depends only on `c_0..c_{n−1}`; N + 1 sweeps of the
/// fixed-point map therefore fix all coefficients exactly.
pub fn expand_delta(q_bar: &[f64], beta: &[f64], m: usize, k: usize, order: usize) -> Result<DeltaExpansion> {
    if q_bar.len() != k || beta.len() != k {
        return Err(Error::input("q_bar and beta must have K entries"));
    }
    if q_bar.iter().chain(beta).any(|v| !(*v > 0.0)) {
        return Err(Error::input("q_bar and beta must be positive"));
    }
    let ratio = m as f64 / k as f64;
    let mut exp = DeltaExpansion {
        delta: Jet::constant(ratio, order),
        q_bar: q_bar.to_vec(),
        beta: beta.to_vec(),
        ratio,
    };
    let kf = k as f64;
    for _ in 0..order {
        let mut sum = Jet::constant(0.0, order);
        for a in exp.loads() {
            sum = &sum + &exp.attenuation(a).scale(a);
        }
        let denom = sum.shift().scale(1.0 / kf).add_scalar(1.0);
        exp.delta = denom.reciprocal()?.scale(ratio);
    }
    Ok(exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reciprocal_geometric() {
        let r = Jet::new(vec![1.0, 1.0, 0.0, 0.0, 0.0]).reciprocal().unwrap();
        assert_eq!(r.coeffs(), &[1.0, -1.0, 1.0, -1.0, 1.0]);
        assert!(Jet::new(vec![0.0, 1.0]).reciprocal().is_err());
        assert!(Jet::new(vec![-1.0, 1.0]).sqrt().is_err());
    }

    #[test]
    fn product_difference_of_squares() {
        let a = Jet::new(vec![1.0, 1.0, 0.0, 0.0]);
        let b = Jet::new(vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!((&a * &b).coeffs(), &[1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Jet::new(vec![4.0, 1.0, -2.0, 0.5, 3.0]);
        let s = a.sqrt().unwrap();
        let back = &s * &s;
        for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn bijet_outer_and_reciprocal() {
        let o = BiJet::outer(&Jet::new(vec![1.0, 1.0]), &Jet::new(vec![1.0, 2.0]));
        assert_eq!((o.coeff(0, 0), o.coeff(0, 1), o.coeff(1, 0), o.coeff(1, 1)), (1.0, 2.0, 1.0, 2.0));

        // 1/(1 − t u)
        let a = BiJet::from_fn(3, |l, m| match (l, m) {
            (0, 0) => 1.0,
            (1, 1) => -1.0,
            _ => 0.0,
        });
        let r = a.reciprocal().unwrap();
        for l in 0..=3 {
            for m in 0..=3 {
                assert_eq!(r.coeff(l, m), if l == m { 1.0 } else { 0.0 });
            }
        }
    }

    /// Direct fixed-point iteration of the δ equation at a given t.
    fn delta_direct(alphas: &[f64], ratio: f64, t: f64) -> f64 {
        let k = alphas.len() as f64;
        let mut d = ratio;
        for _ in 0..10_000 {
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
    fn delta_low_order_coefficients() {
        let q = [2.0, 0.5, 1.0];
        let b = [0.3, 1.0, 0.7];
        let e = expand_delta(&q, &b, 9, 3, 4).unwrap();
        assert!((e.delta.coeff(0) - 3.0).abs() < 1e-15);
        let mean_load = (0.6 + 0.5 + 0.7) / 3.0;
        assert!((e.delta.coeff(1) + 3.0 * mean_load).abs() < 1e-13);
        assert!(e.residual().coeffs().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn delta_matches_finite_differences() {
        let q = [2.0, 0.5, 1.0, 1.5];
        let b = [0.3, 1.0, 0.7, 0.2];
        let alphas: Vec<f64> = q.iter().zip(&b).map(|(q, b)| q * b).collect();
        let e = expand_delta(&q, &b, 12, 4, 4).unwrap();
        let f = |t: f64| delta_direct(&alphas, 3.0, t);
        let s = 1e-4;
        let d1 = (f(s) - f(-s)) / (2.0 * s);
        let d2 = (f(s) - 2.0 * f(0.0) + f(-s)) / (s * s);
        assert!((e.delta.derivative(1) / d1 - 1.0).abs() < 1e-6);
        assert!((e.delta.derivative(2) / d2 - 1.0).abs() < 1e-5);
        let h = 1e-3;
        let (fm2, fm1, fp1, fp2) = (f(-2.0 * h), f(-h), f(h), f(2.0 * h));
        let d3 = (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) / (2.0 * h * h * h);
        assert!((e.delta.derivative(3) / d3 - 1.0).abs() < 1e-3);
    }

    fn jet_strategy(order: usize) -> impl Strategy<Value = Jet> {
        prop::collection::vec(-2.0f64..2.0, order + 1).prop_map(|mut c| {
            c[0] = 2.0;
            Jet::new(c)
        })
    }

    proptest! {
        #[test]
        fn reciprocal_round_trip(a in jet_strategy(6)) {
            let one = &a * &a.reciprocal().unwrap();
            prop_assert!((one.coeff(0) - 1.0).abs() < 1e-13);
            for c in &one.coeffs()[1..] {
                prop_assert!(c.abs() < 1e-10);
            }
        }

        #[test]
        fn multiplication_associates(a in jet_strategy(5), b in jet_strategy(5), c in jet_strategy(5)) {
            let l = &(&a * &b) * &c;
            let r = &a * &(&b * &c);
            for (x, y) in l.coeffs().iter().zip(r.coeffs()) {
                prop_assert!((x - y).abs() < 1e-13 * x.abs().max(1.0));
            }
        }

        #[test]
        fn delta_residual_vanishes(
            loads in prop::collection::vec((0.05f64..3.0, 0.01f64..1.0), 2..8),
            extra in 1usize..10,
            j in 1usize..=5,
        ) {
            let k = loads.len();
            let q: Vec<f64> = loads.iter().map(|l| l.0).collect();
            let b: Vec<f64> = loads.iter().map(|l| l.1).collect();
            let e = expand_delta(&q, &b, k + extra, k, 2 * (j - 1)).unwrap();
            prop_assert!((e.delta.coeff(0) - (k + extra) as f64 / k as f64).abs() < 1e-14);
            if j > 1 {
                prop_assert!(e.delta.coeff(1) < 0.0);
            }
            // Rounding scales with the size of the terms that cancel.
            let abs = Jet::new(e.delta.coeffs().iter().map(|c| c.abs()).collect());
            let scale = &abs * &abs;
            for (c, s) in e.residual().coeffs().iter().zip(scale.coeffs()) {
                prop_assert!(c.abs() < 1e-12 * (1.0 + s));
            }
        }
    }
}
