//! Quick invariant checks for one configuration.

use crate::asymptotic::{asym_dl_sinr, asym_ul_sinr, tau_bar_rhs, AsymptoticParams};
use crate::channel::{draw_channel, SystemConfig, UeGeometry};
use crate::error::{Error, Result};
use crate::exact::{design_olp, dl_sinr, ul_sinr, SolverOptions};
use crate::harness::run::trial_rng;
use crate::tpe::{build_deterministic_moments, design_tpe, tpe_asymptotic_sinrs};
use crate::Link;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64) -> Check {
    Check { name, passed: value <= bound, detail: format!("{value:.3e} (bound {bound:.0e})") }
}

fn spread(v: &[f64], gamma: &[f64]) -> f64 {
    let w: Vec<f64> = v.iter().zip(gamma).map(|(s, g)| s / g).collect();
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / max
}

/// Runs the invariant suite. Numerical failures of a solver are returned as
/// errors; violated invariants as failed checks.
pub fn validate_config(config: &SystemConfig, geometry: &UeGeometry) -> Result<Vec<Check>> {
    config.validate()?;
    if geometry.len() != config.k {
        return Err(Error::input("geometry does not match K"));
    }
    let (m, k, rho, p) = (config.m, config.k, config.rho, config.p_max);
    let g = &config.gamma;
    let b = &geometry.betas;
    let etas = config.etas();
    let mut out = Vec::new();

    let params = AsymptoticParams::compute(g, b, &etas, m, k, rho, p)?;
    let t = params.tau_bar;
    out.push(check("tau_bar fixed point residual", (t - tau_bar_rhs(g, b, m, k, rho, p, t)).abs() / t.max(1.0), 1e-10));

    let perfect = AsymptoticParams::compute(g, b, &vec![0.0; k], m, k, rho, p)?;
    let dl = asym_dl_sinr(&perfect, b, rho, p, &vec![0.0; k]);
    let ul = asym_ul_sinr(&perfect, b, rho, &vec![0.0; k]);
    let dev = (0..k)
        .map(|i| ((dl[i] / (g[i] * t) - 1.0).abs()).max((ul[i] / (g[i] * t) - 1.0).abs()))
        .fold(0.0, f64::max);
    out.push(check("perfect-CSI deterministic SINRs equal gamma*tau_bar", dev, 1e-12));

    let ch = draw_channel(&mut trial_rng(config.seed, 0), geometry, config);
    let again = draw_channel(&mut trial_rng(config.seed, 0), geometry, config);
    out.push(Check {
        name: "channel draw reproducible",
        passed: ch.h_true == again.h_true && ch.h_est == again.h_est,
        detail: String::new(),
    });

    let olp = design_olp(&ch.h_est, g, rho, p, SolverOptions::default())?;
    let dl = dl_sinr(&ch.h_est, &olp.precoder, rho);
    let ul = ul_sinr(&ch.h_est, &olp.precoder.directions, &olp.fixed_point.q, rho);
    out.push(check("exact UL weighted SINR spread", spread(&ul, g), 1e-6));
    out.push(check("exact DL weighted SINR spread", spread(&dl, g), 1e-6));
    let budget = |v: &[f64]| (v.iter().sum::<f64>() / (k as f64 * p) - 1.0).abs();
    out.push(check("exact UL budget", budget(&olp.fixed_point.q), 1e-8));
    out.push(check("exact DL budget", budget(&olp.precoder.dl_powers), 1e-8));

    if etas.iter().any(|e| *e == 1.0) {
        out.push(Check {
            name: "TPE equalization",
            passed: true,
            detail: "skipped: a UE has no CSI (eta = 1)".into(),
        });
    } else {
        let mom = build_deterministic_moments(b, &params.q_bar, &etas, m, k, config.j)?;
        let sol = design_tpe(&mom, g, rho, p, SolverOptions::default())?;
        let ul = tpe_asymptotic_sinrs(&mom, &sol.weights, &sol.q, rho, Link::Uplink);
        let dl = tpe_asymptotic_sinrs(&mom, &sol.weights, &sol.p, rho, Link::Downlink);
        let dev = (0..k)
            .map(|i| ((ul[i] / (g[i] * sol.tau) - 1.0).abs()).max((dl[i] / (g[i] * sol.tau) - 1.0).abs()))
            .fold(0.0, f64::max);
        out.push(check("TPE deterministic weighted SINR equalization", dev, 1e-8));
        out.push(check("TPE DL budget", budget(&sol.p), 1e-6));
    }
    Ok(out)
}
