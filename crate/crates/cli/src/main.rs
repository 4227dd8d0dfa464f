use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maxmin_core::channel::UeGeometry;
use maxmin_core::harness::{parse_values, run_sweep, validate_config, ConfigFile, ExperimentSpec, Scheme, SweepVar};
use maxmin_core::Error;

/// Max-min weighted SINR transceiver simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over one parameter, written as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// eta, p_max or M
        #[arg(long)]
        sweep: String,
        /// Comma-separated sweep values.
        #[arg(long)]
        values: String,
        /// Comma-separated: OLP, A-OLP, US-TPE-dl, OLR, A-OLR, US-TPE-ul, common-TPE-dl, asymptotic-curves
        #[arg(long)]
        schemes: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Geometry CSV (ue_index, distance_m, beta) to use instead of drawing one.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Write the geometry actually used to this CSV.
        #[arg(long)]
        dump_geometry: Option<PathBuf>,
    },
    /// Runs the invariant suite on one configuration.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_config_error() {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    }
}

fn load_geometry(path: &Option<PathBuf>) -> Result<Option<UeGeometry>, Error> {
    path.as_deref().map(UeGeometry::read_csv).transpose()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, sweep, values, schemes, trials, seed, out, geometry, dump_geometry } => {
            let spec = (|| {
                let file = ConfigFile::load(&config)?;
                let (base, geometry) = file.resolve(seed, load_geometry(&geometry)?)?;
                let spec = ExperimentSpec {
                    base,
                    geometry,
                    sweep: sweep.parse::<SweepVar>()?,
                    values: parse_values(&values)?,
                    schemes: Scheme::parse_list(&schemes)?,
                    n_trials: trials,
                    out: Some(out.clone()),
                };
                spec.validate()?;
                Ok::<_, Error>(spec)
            })();
            let spec = match spec {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            if let Some(p) = &dump_geometry {
                if let Err(e) = spec.geometry.write_csv(p) {
                    return fail(&e);
                }
            }
            match run_sweep(&spec) {
                Ok(res) => {
                    for (v, scheme, err) in &res.infeasible {
                        eprintln!("warning: every trial of {scheme} failed at {} = {v}: {err}", spec.sweep);
                    }
                    eprintln!("wrote {} rows to {}", res.rows.len(), out.display());
                    if res.infeasible.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_INFEASIBLE)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config, geometry } => {
            let resolved = ConfigFile::load(&config).and_then(|f| f.resolve(None, load_geometry(&geometry)?));
            let (cfg, geometry) = match resolved {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            match validate_config(&cfg, &geometry) {
                Ok(checks) => {
                    for c in &checks {
                        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                    if checks.iter().all(|c| c.passed) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => fail(&e),
            }
        }
    }
}
