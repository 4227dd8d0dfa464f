//! System configuration, UE geometry and Gauss-Markov channel generation.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Static description of one single-cell MU-MIMO system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antenna count.
    pub m: usize,
    /// Number of single-antenna UEs.
    pub k: usize,
    /// Effective SNR, linear.
    pub rho: f64,
    /// Average per-UE power budget.
    pub p_max: f64,
    /// CSI error level shared by all UEs unless `eta_per_ue` is set.
    pub eta: f64,
    pub eta_per_ue: Option<Vec<f64>>,
    /// UE priorities.
    pub gamma: Vec<f64>,
    /// TPE truncation order.
    pub j: usize,
    pub seed: u64,
    pub cell_radius: f64,
    pub d0: f64,
    /// Path-loss exponent.
    pub ple: f64,
}

impl SystemConfig {
    /// The evaluation setup used throughout: M = 128, K = 32, ρ = 20 dB, P_max = 5,
    /// perfect CSI, unit priorities, J = 2, 250 m cell, d0 = 30 m, exponent 3.8.
    pub fn reference() -> Self {
        Self {
            m: 128,
            k: 32,
            rho: 100.0,
            p_max: 5.0,
            eta: 0.0,
            eta_per_ue: None,
            gamma: vec![1.0; 32],
            j: 2,
            seed: 0,
            cell_radius: 250.0,
            d0: 30.0,
            ple: 3.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::input("M and K must be positive"));
        }
        if self.k >= self.m {
            return Err(Error::input(format!("need K < M, got K = {} and M = {}", self.k, self.m)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::input(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.p_max > 0.0) || !self.p_max.is_finite() {
            return Err(Error::input(format!("p_max must be positive, got {}", self.p_max)));
        }
        check_eta(self.eta)?;
        if let Some(etas) = &self.eta_per_ue {
            if etas.len() != self.k {
                return Err(Error::input(format!("eta_per_ue has {} entries, expected {}", etas.len(), self.k)));
            }
            etas.iter().try_for_each(|e| check_eta(*e))?;
        }
        if self.gamma.len() != self.k {
            return Err(Error::input(format!("gamma has {} entries, expected {}", self.gamma.len(), self.k)));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::input(format!("priorities must be positive, got {g}")));
        }
        if self.j == 0 {
            return Err(Error::input("truncation order J must be at least 1"));
        }
        if !(self.cell_radius > 0.0) || !(self.d0 > 0.0) || !self.ple.is_finite() {
            return Err(Error::input("cell_radius and d0 must be positive and ple finite"));
        }
        Ok(())
    }

    /// Per-UE CSI error levels.
    pub fn etas(&self) -> Vec<f64> {
        match &self.eta_per_ue {
            Some(v) => v.clone(),
            None => vec![self.eta; self.k],
        }
    }

    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.k as f64
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::input(format!("eta must lie in [0, 1], got {eta}")))
    }
}

/// UE distances and the resulting large-scale gains.
#[derive(Debug, Clone, PartialEq)]
pub struct UeGeometry {
    pub distances: Vec<f64>,
    pub betas: Vec<f64>,
}

impl UeGeometry {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Geometry with the given gains and no meaningful distances.
    pub fn from_betas(betas: Vec<f64>) -> Self {
        Self { distances: vec![f64::NAN; betas.len()], betas }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for (i, (d, b)) in self.distances.iter().zip(&self.betas).enumerate() {
            w.serialize(GeometryRow { ue_index: i, distance_m: *d, beta: *b }).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut rows: Vec<GeometryRow> = Vec::new();
        for row in r.deserialize() {
            rows.push(row.map_err(csv_err)?);
        }
        rows.sort_by_key(|r| r.ue_index);
        if rows.iter().enumerate().any(|(i, r)| r.ue_index != i) {
            return Err(Error::input(format!("{}: ue_index must run 0..K-1", path.display())));
        }
        if let Some(r) = rows.iter().find(|r| !(r.beta > 0.0)) {
            return Err(Error::input(format!("{}: beta of UE {} is not positive", path.display(), r.ue_index)));
        }
        Ok(Self {
            distances: rows.iter().map(|r| r.distance_m).collect(),
            betas: rows.iter().map(|r| r.beta).collect(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryRow {
    ue_index: usize,
    distance_m: f64,
    beta: f64,
}

/// `β = 1 / (1 + (x/d0)^ple)`.
pub fn generate_pathloss(distances: &[f64], d0: f64, ple: f64) -> Result<UeGeometry> {
    if !(d0 > 0.0) {
        return Err(Error::input(format!("reference distance must be positive, got {d0}")));
    }
    let betas = distances
        .iter()
        .map(|&x| {
            if !x.is_finite() || x < 0.0 {
                Err(Error::input(format!("distance {x} is not a finite nonnegative value")))
            } else {
                Ok(1.0 / (1.0 + (x / d0).powf(ple)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UeGeometry { distances: distances.to_vec(), betas })
}

/// Distances of `k` points uniform over a disc of the given radius.
pub fn sample_ue_positions<R: Rng + ?Sized>(rng: &mut R, k: usize, cell_radius: f64) -> Vec<f64> {
    (0..k).map(|_| cell_radius * rng.random::<f64>().sqrt()).collect()
}

/// One `CN(0, 1)` draw: independent `N(0, 1/2)` real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// True channel and its Gauss-Markov estimate for one coherence block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h_true: CMatrix,
    pub h_est: CMatrix,
}

impl ChannelRealization {
    pub fn perfect(h: CMatrix) -> Self {
        Self { h_est: h.clone(), h_true: h }
    }
}

/// Draws `h_k = √β_k z_k` and `ĥ_k = √(1−η_k²) h_k + √β_k η_k w_k`.
///
/// The fading and error matrices are always drawn in the same order, so one RNG
/// state gives the same `z` and `w` for every η.
pub fn draw_channel<R: Rng + ?Sized>(rng: &mut R, geometry: &UeGeometry, config: &SystemConfig) -> ChannelRealization {
    let (m, k) = (config.m, config.k);
    assert_eq!(geometry.len(), k, "geometry has {} UEs, config has {}", geometry.len(), k);
    let z = CMatrix::from_fn(m, k, |_, _| complex_normal(rng));
    let w = CMatrix::from_fn(m, k, |_, _| complex_normal(rng));
    let etas = config.etas();

    let mut h_true = z;
    let mut h_est = w;
    for c in 0..k {
        let sb = geometry.betas[c].sqrt();
        let eta = etas[c];
        for r in 0..m {
            let h = h_true[(r, c)] * sb;
            h_true[(r, c)] = h;
            h_est[(r, c)] = if eta == 0.0 {
                h
            } else {
                h * (1.0 - eta * eta).sqrt() + h_est[(r, c)] * (sb * eta)
            };
        }
    }
    ChannelRealization { h_true, h_est }
}
