//! `billzeta`: spectral zeta sum rules for heterogeneous strings and membranes.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commands::Failure;
use config::{Command, Format, Overrides, Route, RunConfig};

#[derive(Parser)]
#[command(name = "billzeta", version, about = "Spectral zeta sum rules for heterogeneous strings and membranes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate Z(s) by the closed form, the trace routes and the oracle.
    Sumrule {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        route: Option<Route>,
        /// Replace the truncated diagonal series by (1 + λσ_nn)^s.
        #[arg(long)]
        resummed: bool,
    },
    /// Dump the Green's function coefficients q^(k) and Q^(k) and their convolution residuals.
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Root order N of the Green's function of order 1/N.
        #[arg(long = "n")]
        root_order: Option<usize>,
        #[arg(long)]
        max_order: Option<usize>,
    },
    /// Fit the λ-scaling of |Z_pert - Z_oracle| and compare with the threshold.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Drop Z^(2) from the perturbative value (expected slope about 2).
        #[arg(long)]
        first_order_only: bool,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Solve the Galerkin eigenproblem and list eigenvalues with residuals.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rational order(s), e.g. 3/2, 1+1/4, 1/2+1/3.
    #[arg(long = "s", value_delimiter = ',')]
    orders: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<String>>,
    /// Number of retained modes.
    #[arg(long)]
    modes: Option<usize>,
    /// Run jobs sequentially in a fixed order.
    #[arg(long)]
    deterministic: bool,
    /// Table cache directory (default: $BILLZETA_CACHE_DIR, then .billzeta-cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            orders: self.orders.clone(),
            lambdas: self.lambda.clone(),
            deterministic: self.deterministic,
            cache_dir: self.cache_dir.clone(),
            out: self.out.clone(),
            format: self.format,
            modes: self.modes,
            ..Overrides::default()
        }
    }
}

fn load(common: &Common, extra: impl FnOnce(&mut Overrides)) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(vec![format!("config {}: {e}", path.display())]))?;
            config::parse_config(&text).map_err(Failure::Validation)?
        }
        None => RunConfig::default(),
    };
    let mut o = common.overrides();
    extra(&mut o);
    let violations = config.apply(&o);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(Failure::Validation(violations))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, command, extra): (&Common, Command, Box<dyn FnOnce(&mut Overrides)>) = match &cli.command {
        Cmd::Sumrule { common, route, resummed } => {
            let (route, resummed) = (*route, *resummed);
            (common, Command::SumRule, Box::new(move |o| {
                o.route = route;
                o.resummed = resummed;
            }))
        }
        Cmd::Coeffs { common, root_order, max_order } => {
            let (n, k) = (*root_order, *max_order);
            (common, Command::Coeffs, Box::new(move |o| {
                o.root_order = n;
                o.max_order = k;
            }))
        }
        Cmd::Verify { common, first_order_only, threshold } => {
            let (f, t) = (*first_order_only, *threshold);
            (common, Command::Verify, Box::new(move |o| {
                o.first_order_only = f;
                o.threshold = t;
            }))
        }
        Cmd::Spectrum { common } => (common, Command::Spectrum, Box::new(|_| {})),
    };
    let config = load(common, extra)?;
    let plan = config::validate(&config, command).map_err(Failure::Validation)?;
    match command {
        Command::SumRule => commands::sumrule(&plan),
        Command::Coeffs => commands::coeffs(&plan),
        Command::Verify => commands::verify(&plan),
        Command::Spectrum => commands::spectrum(&plan),
    }
}

/// Prints a single-line JSON error on stderr and returns the exit code.
fn report(failure: Failure) -> u8 {
    let (code, kind, messages) = match failure {
        Failure::Validation(v) => (2, "validation", v),
        Failure::Numerical(m) => (3, "numerical", vec![m]),
        Failure::Acceptance(m) => (4, "acceptance", vec![m]),
        Failure::Other(e) => (1, "io", vec![format!("{e:#}")]),
    };
    let line = serde_json::json!({ "error": kind, "exit_code": code, "messages": messages });
    eprintln!("{line}");
    code
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(report(f)),
    }
}
