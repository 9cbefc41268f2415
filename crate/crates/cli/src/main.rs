//! `nosig`: run EPR, no-signalling and quantum-potential scenarios from a
//! JSON config and emit CSV or JSON.
//!
//! Exit status: 0 success, 2 bad input, 3 a verification check failed,
//! 1 anything else.

mod assemble;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nosig_core::bohm::SignConvention;
use nosig_core::epr::{BasisRule, EavesdropPolicy};

use commands::{Artifact, Overrides};
use config::{Config, Format};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "nosig",
    version,
    about = "EPR statistics, no-signalling audits and quantum-potential grids"
)]
struct Cli {
    /// JSON scenario document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `sampling.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate E(θ_AB) against −cos θ_AB.
    EprCorrelate {
        /// Relative angles θ_AB in radians.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
        /// Skip Monte Carlo sampling.
        #[arg(long)]
        exact: bool,
        /// Trials per angle.
        #[arg(long)]
        n: Option<usize>,
        /// Intercept-resend eavesdropper: `uniform` or a fixed angle.
        #[arg(long, allow_hyphen_values = true)]
        eve: Option<String>,
    },
    /// CHSH value, exact and sampled.
    Chsh {
        /// a,a',b,b' in radians.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
        #[arg(long)]
        exact: bool,
        /// Trials per setting pair.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        eve: Option<String>,
    },
    /// Sift a key from aligned rounds and test for eavesdropping.
    Qkd {
        /// CHSH test angles a,a',b,b'.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
        /// Trials per setting.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        eve: Option<String>,
    },
    /// No-signalling audits.
    Nosignal {
        #[command(subcommand)]
        which: Nosignal,
    },
    /// Locality defect and factorization residual of a Hamiltonian.
    Factorize {
        #[arg(long, allow_hyphen_values = true)]
        time: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
    },
    /// Quantum potential on a 1D or 2D grid.
    Qpotential {
        #[arg(long, value_enum)]
        sign: Option<SignArg>,
    },
}

#[derive(Subcommand, Debug)]
enum Nosignal {
    /// Rotate A's apparatus and compare B's spin expectation.
    BohmHiley {
        /// alpha,alpha',beta in radians.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
    },
    /// Local-sum evolution under several remote Hamiltonians.
    Shimony {
        #[arg(long, allow_hyphen_values = true)]
        time: Option<f64>,
    },
    /// Remote marginal across a coupling-strength scan.
    Audit {
        /// Coupling strengths to compare.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        time: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SignArg {
    Paper,
    Standard,
}

fn parse_eve(arg: &str) -> Result<EavesdropPolicy, CliError> {
    let rule = if arg == "uniform" {
        BasisRule::UniformRandom
    } else {
        let theta: f64 = arg.parse().map_err(|_| {
            CliError::Config(format!("--eve takes `uniform` or an angle, got `{arg}`"))
        })?;
        BasisRule::Fixed(theta)
    };
    Ok(EavesdropPolicy::InterceptResend(rule))
}

fn load_config(path: Option<&PathBuf>, fallback: Option<&str>) -> Result<Config, CliError> {
    match (path, fallback) {
        (Some(p), _) => Config::load(p),
        (None, Some(text)) => Config::parse(text, "bundled default"),
        (None, None) => Ok(Config::default()),
    }
}

fn run(cli: &Cli) -> Result<(Artifact, Config), CliError> {
    let mut ov = Overrides {
        seed: cli.seed,
        ..Overrides::default()
    };
    let set_eve = |ov: &mut Overrides, eve: &Option<String>| -> Result<(), CliError> {
        ov.eavesdropper = eve.as_deref().map(parse_eve).transpose()?;
        Ok(())
    };
    let (name, fallback) = match &cli.command {
        Command::Nosignal {
            which: Nosignal::Shimony { .. },
        } => ("shimony", Some(commands::SHIMONY_DEFAULT)),
        Command::EprCorrelate { .. } => ("epr-correlate", None),
        Command::Chsh { .. } => ("chsh", None),
        Command::Qkd { .. } => ("qkd", None),
        Command::Nosignal {
            which: Nosignal::BohmHiley { .. },
        } => ("bohm-hiley", None),
        Command::Nosignal {
            which: Nosignal::Audit { .. },
        } => ("audit", None),
        Command::Factorize { .. } => ("factorize", None),
        Command::Qpotential { .. } => ("qpotential", None),
    };
    let config = load_config(cli.config.as_ref(), fallback)?;
    config.expect_scenario(name)?;
    let artifact = match &cli.command {
        Command::EprCorrelate {
            angles,
            exact,
            n,
            eve,
        } => {
            ov.angles = angles.clone();
            ov.exact = *exact;
            ov.n = *n;
            set_eve(&mut ov, eve)?;
            commands::epr_correlate(&config, &ov)?
        }
        Command::Chsh {
            angles,
            exact,
            n,
            eve,
        } => {
            ov.angles = angles.clone();
            ov.exact = *exact;
            ov.n = *n;
            set_eve(&mut ov, eve)?;
            commands::chsh_command(&config, &ov)?
        }
        Command::Qkd { angles, n, eve } => {
            ov.angles = angles.clone();
            ov.n = *n;
            set_eve(&mut ov, eve)?;
            commands::qkd(&config, &ov)?
        }
        Command::Nosignal { which } => match which {
            Nosignal::BohmHiley { angles } => {
                ov.angles = angles.clone();
                commands::bohm_hiley(&config, &ov)?
            }
            Nosignal::Shimony { time } => {
                ov.time = *time;
                commands::shimony(&config, &ov)?
            }
            Nosignal::Audit { lambda, time } => {
                ov.lambda = lambda.clone();
                ov.time = *time;
                commands::audit(&config, &ov)?
            }
        },
        Command::Factorize { time, lambda } => {
            ov.time = *time;
            ov.lambda = lambda.map(|l| vec![l]);
            commands::factorize(&config, &ov)?
        }
        Command::Qpotential { sign } => {
            ov.sign = sign.map(|s| match s {
                SignArg::Paper => SignConvention::Paper,
                SignArg::Standard => SignConvention::Standard,
            });
            commands::qpotential(&config, &ov)?
        }
    };
    Ok((artifact, config))
}

fn emit(cli: &Cli, config: &Config, artifact: &Artifact) -> Result<(), CliError> {
    let body = match cli.format.or(config.output.format) {
        Some(Format::Csv) => &artifact.csv,
        Some(Format::Json) => &artifact.json,
        None => artifact.text.as_ref().unwrap_or(&artifact.json),
    };
    match cli.out.as_ref().or(config.output.path.as_ref()) {
        Some(path) => std::fs::write(path, body)?,
        None => match std::io::stdout().write_all(body.as_bytes()) {
            // a closed downstream pipe (`| head`) is not a failure
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli).and_then(|(artifact, config)| {
        emit(&cli, &config, &artifact)?;
        match artifact.violation {
            Some(v) => Err(CliError::Tolerance(v)),
            None => Ok(()),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nosig: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
