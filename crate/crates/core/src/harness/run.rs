//! Monte Carlo evaluation of every scheme at one operating point, and sweeps.

use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotic::{aolp_powers, asym_dl_sinr, asym_sinr_given_powers, asym_ul_sinr, AolpPowers, AsymptoticParams};
use crate::channel::{draw_channel, ChannelRealization, SystemConfig, UeGeometry};
use crate::error::{Error, Result};
use crate::exact::{
    allocate_dl_powers, compute_directions, dl_sinr, solve_dual_powers, ul_sinr, weighted_min, DirectionMode, Precoder,
    SolverOptions,
};
use crate::harness::config::{ExperimentSpec, Scheme};
use crate::tpe::{
    balanced_dl_powers_fixed_weights, build_deterministic_moments, build_empirical_moments, common_weights, design_tpe,
    empirical_dl_sinr, empirical_ul_sinr, tpe_asymptotic_sinrs, DeterministicMoments, TpeSolution,
};
use crate::Link;

/// `(1/K) Σ_k log2(1 + SINR_k)`.
pub fn average_rate(sinr: &[f64]) -> f64 {
    sinr.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / sinr.len() as f64
}

/// RNG of trial `index`: one ChaCha stream per trial, so results do not depend on
/// execution order. Stream 0 is reserved for per-experiment draws.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// One trial of one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub rate: f64,
    pub weighted_min: f64,
}

impl Sample {
    fn from_sinr(sinr: &[f64], gamma: &[f64]) -> Self {
        Self { rate: average_rate(sinr), weighted_min: weighted_min(sinr, gamma) }
    }
}

/// Aggregate over the trials of one scheme at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub scheme: String,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub min_weighted_sinr_mean: f64,
    /// First failure, if any trial failed.
    pub first_error: Option<String>,
}

impl PointResult {
    fn from_samples(scheme: &str, samples: &[std::result::Result<Sample, String>]) -> Self {
        let ok: Vec<Sample> = samples.iter().filter_map(|s| s.as_ref().ok().copied()).collect();
        let n = ok.len() as f64;
        let mean = ok.iter().map(|s| s.rate).sum::<f64>() / n;
        let var = if ok.len() > 1 {
            ok.iter().map(|s| (s.rate - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            scheme: scheme.to_string(),
            mean_rate: mean,
            std_rate: var.sqrt(),
            n_trials: samples.len(),
            n_failed: samples.len() - ok.len(),
            min_weighted_sinr_mean: ok.iter().map(|s| s.weighted_min).sum::<f64>() / n,
            first_error: samples.iter().find_map(|s| s.as_ref().err().cloned()),
        }
    }

    fn deterministic(scheme: &str, sinr: &[f64], gamma: &[f64]) -> Self {
        let s = Sample::from_sinr(sinr, gamma);
        Self {
            scheme: scheme.to_string(),
            mean_rate: s.rate,
            std_rate: 0.0,
            n_trials: 0,
            n_failed: 0,
            min_weighted_sinr_mean: s.weighted_min,
            first_error: None,
        }
    }

    fn failed_deterministic(scheme: &str, err: &Error) -> Self {
        Self {
            scheme: scheme.to_string(),
            mean_rate: f64::NAN,
            std_rate: 0.0,
            n_trials: 0,
            n_failed: 1,
            min_weighted_sinr_mean: f64::NAN,
            first_error: Some(err.to_string()),
        }
    }

    /// Every trial failed (or the deterministic evaluation did).
    pub fn all_failed(&self) -> bool {
        self.n_failed > 0 && self.n_failed >= self.n_trials
    }
}

/// Quantities computed once per operating point from statistics only.
#[derive(Debug, Clone)]
pub struct PointDesign {
    pub config: SystemConfig,
    pub betas: Vec<f64>,
    pub etas: Vec<f64>,
    pub params: AsymptoticParams,
    pub aolp: AolpPowers,
    pub tpe: Option<std::result::Result<(DeterministicMoments, TpeSolution), String>>,
    pub common_tpe: Option<std::result::Result<(Vec<DVector<f64>>, Vec<f64>), String>>,
}

impl PointDesign {
    pub fn new(config: &SystemConfig, geometry: &UeGeometry, schemes: &[Scheme]) -> Result<Self> {
        config.validate()?;
        if geometry.len() != config.k {
            return Err(Error::input("geometry does not match K"));
        }
        let betas = geometry.betas.clone();
        let etas = config.etas();
        let params =
            AsymptoticParams::compute(&config.gamma, &betas, &etas, config.m, config.k, config.rho, config.p_max)?;
        let aolp = aolp_powers(&config.gamma, &betas, &params.mu, config.rho, config.p_max);
        let wants = |s: Scheme| schemes.contains(&s);
        let tpe = (wants(Scheme::TpeDl) || wants(Scheme::TpeUl) || wants(Scheme::CommonTpeDl)
            || wants(Scheme::AsymptoticCurves))
        .then(|| {
            let mom = build_deterministic_moments(&betas, &params.q_bar, &etas, config.m, config.k, config.j)?;
            let sol = design_tpe(&mom, &config.gamma, config.rho, config.p_max, SolverOptions::default())?;
            Ok::<_, Error>((mom, sol))
        })
        .map(|r| r.map_err(|e| e.to_string()));
        let common_tpe = match (&tpe, wants(Scheme::CommonTpeDl)) {
            (Some(Ok((mom, sol))), true) => {
                let w = vec![common_weights(&sol.weights); config.k];
                Some(
                    balanced_dl_powers_fixed_weights(mom, &w, &config.gamma, config.rho, config.p_max)
                        .map(|(p, _)| (w, p))
                        .map_err(|e| e.to_string()),
                )
            }
            (Some(Err(e)), true) => Some(Err(e.clone())),
            _ => None,
        };
        Ok(Self { config: config.clone(), betas, etas, params, aolp, tpe, common_tpe })
    }

    /// Deterministic-equivalent rates of every scheme.
    pub fn asymptotic_rows(&self) -> Vec<PointResult> {
        let c = &self.config;
        let g = &c.gamma;
        let mut rows = vec![
            PointResult::deterministic("asym-OLP", &asym_dl_sinr(&self.params, &self.betas, c.rho, c.p_max, &self.etas), g),
            PointResult::deterministic(
                "asym-A-OLP",
                &asym_sinr_given_powers(&self.aolp.p_tilde, Link::Downlink, &self.params, &self.betas, c.rho, &self.etas),
                g,
            ),
            PointResult::deterministic("asym-OLR", &asym_ul_sinr(&self.params, &self.betas, c.rho, &self.etas), g),
        ];
        let no_signal = self.etas.iter().all(|e| *e == 1.0);
        for (name, link) in [("asym-US-TPE-dl", Link::Downlink), ("asym-US-TPE-ul", Link::Uplink)] {
            rows.push(match &self.tpe {
                Some(Ok((mom, sol))) => {
                    let powers = if link == Link::Downlink { &sol.p } else { &sol.q };
                    PointResult::deterministic(name, &tpe_asymptotic_sinrs(mom, &sol.weights, powers, c.rho, link), g)
                }
                // Without a mean signal component every deterministic SINR is zero.
                _ if no_signal => PointResult::deterministic(name, &vec![0.0; c.k], g),
                Some(Err(e)) => PointResult::failed_deterministic(name, &Error::Infeasible(e.clone())),
                None => unreachable!("TPE design is built whenever curves are requested"),
            });
        }
        rows
    }

    /// SINRs of every sampled scheme in `schemes` on one channel draw.
    pub fn evaluate(&self, schemes: &[Scheme], ch: &ChannelRealization) -> Vec<std::result::Result<Sample, String>> {
        let c = &self.config;
        let g = &c.gamma;
        let wants = |s: Scheme| schemes.contains(&s);

        let exact = (wants(Scheme::Olp) || wants(Scheme::Olr)).then(|| {
            let fp = solve_dual_powers(&ch.h_est, g, c.rho, c.p_max, SolverOptions::default())?;
            let dirs = compute_directions(&ch.h_est, &fp.q, c.rho, DirectionMode::Full)?;
            Ok::<_, Error>((fp, dirs))
        });
        let asym_dirs = (wants(Scheme::AOlp) || wants(Scheme::AOlr))
            .then(|| compute_directions(&ch.h_est, &self.params.q_bar, c.rho, DirectionMode::Full));
        let tpe_moments = (wants(Scheme::TpeDl) || wants(Scheme::TpeUl) || wants(Scheme::CommonTpeDl))
            .then(|| build_empirical_moments(&ch.h_true, &ch.h_est, &self.params.q_bar, c.j));

        let err = |e: &Error| e.to_string();
        schemes
            .iter()
            .filter(|s| **s != Scheme::AsymptoticCurves)
            .map(|s| {
                let sinr: std::result::Result<Vec<f64>, String> = match s {
                    Scheme::Olp => match exact.as_ref().unwrap() {
                        Ok((fp, dirs)) => allocate_dl_powers(&ch.h_est, dirs, g, fp.tau, c.rho)
                            .map(|p| dl_sinr(&ch.h_true, &Precoder { directions: dirs.clone(), dl_powers: p }, c.rho))
                            .map_err(|e| err(&e)),
                        Err(e) => Err(err(e)),
                    },
                    Scheme::Olr => match exact.as_ref().unwrap() {
                        Ok((fp, dirs)) => Ok(ul_sinr(&ch.h_true, dirs, &fp.q, c.rho)),
                        Err(e) => Err(err(e)),
                    },
                    Scheme::AOlp => match asym_dirs.as_ref().unwrap() {
                        Ok(dirs) => Ok(dl_sinr(
                            &ch.h_true,
                            &Precoder { directions: dirs.clone(), dl_powers: self.aolp.p_tilde.clone() },
                            c.rho,
                        )),
                        Err(e) => Err(err(e)),
                    },
                    Scheme::AOlr => match asym_dirs.as_ref().unwrap() {
                        Ok(dirs) => Ok(ul_sinr(&ch.h_true, dirs, &self.aolp.q_tilde, c.rho)),
                        Err(e) => Err(err(e)),
                    },
                    Scheme::TpeDl | Scheme::TpeUl => match (tpe_moments.as_ref().unwrap(), self.tpe.as_ref().unwrap()) {
                        (Ok(m), Ok((_, sol))) => Ok(if *s == Scheme::TpeDl {
                            empirical_dl_sinr(m, &sol.weights, &sol.p, c.rho)
                        } else {
                            empirical_ul_sinr(m, &sol.weights, &sol.q, c.rho)
                        }),
                        (Err(e), _) => Err(err(e)),
                        (_, Err(e)) => Err(e.clone()),
                    },
                    Scheme::CommonTpeDl => match (tpe_moments.as_ref().unwrap(), self.common_tpe.as_ref().unwrap()) {
                        (Ok(m), Ok((w, p))) => Ok(empirical_dl_sinr(m, w, p, c.rho)),
                        (Err(e), _) => Err(err(e)),
                        (_, Err(e)) => Err(e.clone()),
                    },
                    Scheme::AsymptoticCurves => unreachable!(),
                };
                sinr.and_then(|v| {
                    if v.iter().all(|x| x.is_finite() && *x >= 0.0) {
                        Ok(Sample::from_sinr(&v, g))
                    } else {
                        Err(format!("{s}: non-finite SINR"))
                    }
                })
            })
            .collect()
    }
}

/// Runs `n_trials` channel draws at one point for all `schemes` and aggregates
/// each. Trials run in parallel; trial `t` always uses RNG stream `t + 1` of
/// `config.seed`, so the aggregate is independent of scheduling.
pub fn run_point_schemes(
    config: &SystemConfig,
    geometry: &UeGeometry,
    schemes: &[Scheme],
    n_trials: usize,
) -> Result<Vec<PointResult>> {
    if schemes.is_empty() {
        return Err(Error::input("scheme list is empty"));
    }
    if n_trials == 0 && schemes.iter().any(|s| *s != Scheme::AsymptoticCurves) {
        return Err(Error::input("number of trials must be positive"));
    }
    let design = PointDesign::new(config, geometry, schemes)?;
    let sampled: Vec<Scheme> = schemes.iter().copied().filter(|s| *s != Scheme::AsymptoticCurves).collect();
    let trials: Vec<Vec<std::result::Result<Sample, String>>> = if sampled.is_empty() {
        Vec::new()
    } else {
        (0..n_trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(config.seed, t);
                let ch = draw_channel(&mut rng, geometry, config);
                design.evaluate(&sampled, &ch)
            })
            .collect()
    };
    let mut out = Vec::new();
    for s in schemes {
        if *s == Scheme::AsymptoticCurves {
            out.extend(design.asymptotic_rows());
        } else {
            let idx = sampled.iter().position(|x| x == s).unwrap();
            let samples: Vec<_> = trials.iter().map(|t| t[idx].clone()).collect();
            out.push(PointResult::from_samples(s.name(), &samples));
        }
    }
    Ok(out)
}

/// Single-scheme convenience wrapper around [`run_point_schemes`].
pub fn run_point(config: &SystemConfig, geometry: &UeGeometry, scheme: Scheme, n_trials: usize) -> Result<Vec<PointResult>> {
    run_point_schemes(config, geometry, &[scheme], n_trials)
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub mean_rate_bps_hz: f64,
    pub std_rate: f64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub min_weighted_sinr_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// `(sweep value, scheme, first error)` for every point where nothing succeeded.
    pub infeasible: Vec<(f64, String, String)>,
}

/// Runs every sweep point in order and writes the CSV if `spec.out` is set.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut infeasible = Vec::new();
    for &v in &spec.values {
        let config = spec.sweep.apply(&spec.base, v)?;
        for r in run_point_schemes(&config, &spec.geometry, &spec.schemes, spec.n_trials)? {
            if r.all_failed() {
                infeasible.push((v, r.scheme.clone(), r.first_error.clone().unwrap_or_default()));
            }
            rows.push(ResultRow {
                sweep_var: spec.sweep.name().to_string(),
                sweep_value: v,
                scheme: r.scheme,
                mean_rate_bps_hz: r.mean_rate,
                std_rate: r.std_rate,
                n_trials: r.n_trials,
                n_failed: r.n_failed,
                min_weighted_sinr_mean: r.min_weighted_sinr_mean,
            });
        }
    }
    if let Some(path) = &spec.out {
        write_rows(path, &rows)?;
    }
    Ok(SweepOutput { rows, infeasible })
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
