//! Config files, sweep variables and scheme names.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::channel::{generate_pathloss, sample_ue_positions, SystemConfig, UeGeometry};
use crate::error::{Error, Result};

/// On-disk configuration. `rho` is given in dB. Missing keys take the values of
/// [`SystemConfig::reference`]; `gamma` and `distances` are drawn from the seed
/// when absent.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub rho: Option<f64>,
    pub p_max: Option<f64>,
    pub eta: Option<f64>,
    pub eta_per_ue: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    #[serde(rename = "J")]
    pub j: Option<usize>,
    pub seed: Option<u64>,
    pub cell_radius: Option<f64>,
    pub d0: Option<f64>,
    pub ple: Option<f64>,
    pub distances: Option<Vec<f64>>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Resolves defaults and draws whatever the file leaves random. `geometry`
    /// overrides both `distances` and the sampled positions.
    pub fn resolve(&self, seed_override: Option<u64>, geometry: Option<UeGeometry>) -> Result<(SystemConfig, UeGeometry)> {
        let r = SystemConfig::reference();
        let k = self.k.unwrap_or(r.k);
        let seed = seed_override.or(self.seed).unwrap_or(r.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Stream 0 holds the per-experiment draws; trials use streams 1, 2, ...
        rng.set_stream(0);
        let cell_radius = self.cell_radius.unwrap_or(r.cell_radius);
        let d0 = self.d0.unwrap_or(r.d0);
        let ple = self.ple.unwrap_or(r.ple);
        if !(cell_radius > 0.0) {
            return Err(Error::input("cell_radius must be positive"));
        }
        // Always drawn, so the γ draws below do not depend on where geometry came from.
        let sampled = sample_ue_positions(&mut rng, k, cell_radius);
        let geometry = match (geometry, &self.distances) {
            (Some(g), _) => g,
            (None, Some(d)) => generate_pathloss(d, d0, ple)?,
            (None, None) => generate_pathloss(&sampled, d0, ple)?,
        };
        let gamma = match &self.gamma {
            Some(g) => g.clone(),
            None => (0..k).map(|_| rng.random_range(1.0..2.0)).collect(),
        };
        let config = SystemConfig {
            m: self.m.unwrap_or(r.m),
            k,
            rho: self.rho.map(db_to_linear).unwrap_or(r.rho),
            p_max: self.p_max.unwrap_or(r.p_max),
            eta: self.eta.unwrap_or(r.eta),
            eta_per_ue: self.eta_per_ue.clone(),
            gamma,
            j: self.j.unwrap_or(r.j),
            seed,
            cell_radius,
            d0,
            ple,
        };
        config.validate()?;
        if geometry.len() != k {
            return Err(Error::input(format!("geometry has {} UEs, expected {k}", geometry.len())));
        }
        Ok((config, geometry))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Eta,
    PMax,
    M,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Eta => "eta",
            SweepVar::PMax => "p_max",
            SweepVar::M => "M",
        }
    }

    /// `base` with the swept variable set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = base.clone();
        match self {
            SweepVar::Eta => {
                c.eta = value;
                c.eta_per_ue = None;
            }
            SweepVar::PMax => c.p_max = value,
            SweepVar::M => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::input(format!("M must be a positive integer, got {value}")));
                }
                c.m = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(SweepVar::Eta),
            "p_max" => Ok(SweepVar::PMax),
            "M" | "m" => Ok(SweepVar::M),
            _ => Err(Error::input(format!("unknown sweep variable '{s}' (expected eta, p_max or M)"))),
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Olp,
    AOlp,
    TpeDl,
    Olr,
    AOlr,
    TpeUl,
    /// One weight vector shared by all UEs; a baseline for the user-specific TPE.
    CommonTpeDl,
    /// Deterministic-equivalent rates, no sampling.
    AsymptoticCurves,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Olp,
        Scheme::AOlp,
        Scheme::TpeDl,
        Scheme::Olr,
        Scheme::AOlr,
        Scheme::TpeUl,
        Scheme::CommonTpeDl,
        Scheme::AsymptoticCurves,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Olp => "OLP",
            Scheme::AOlp => "A-OLP",
            Scheme::TpeDl => "US-TPE-dl",
            Scheme::Olr => "OLR",
            Scheme::AOlr => "A-OLR",
            Scheme::TpeUl => "US-TPE-ul",
            Scheme::CommonTpeDl => "common-TPE-dl",
            Scheme::AsymptoticCurves => "asymptotic-curves",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Scheme>> {
        let list: Vec<Scheme> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Scheme::from_str)
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::input("scheme list is empty"));
        }
        Ok(list)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
                Error::input(format!("unknown scheme '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::input(format!("'{t}' is not a number"))))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::input("value list is empty"));
    }
    Ok(v)
}

/// Everything needed to run one sweep.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub geometry: UeGeometry,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_trials: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::input("sweep value list is empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::input("scheme list is empty"));
        }
        if self.n_trials == 0 {
            return Err(Error::input("number of trials must be positive"));
        }
        if self.geometry.len() != self.base.k {
            return Err(Error::input("geometry does not match K"));
        }
        for v in &self.values {
            self.sweep.apply(&self.base, *v)?;
        }
        Ok(())
    }
}
