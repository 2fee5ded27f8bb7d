//! `delaytherm` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "delaytherm", version, about = "Modal stability analysis of delayed thermoelastic systems")]
#[command(after_help = "Flags may also be given in a `key = value` file passed with --config; flags on the \
command line override the file. Set RAYON_NUM_THREADS to limit worker threads.")]
struct Cli {
    /// Report errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rightmost characteristic root of every mode and the spectral abscissa.
    #[command(args_override_self = true)]
    Spectrum(SpectrumArgs),
    /// Per-mode resolvent peaks and the envelope growth exponent.
    #[command(args_override_self = true)]
    Resolvent(ResolventArgs),
    /// Time-domain simulation with energy tracking.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Stability verdicts over a (beta, alpha) grid.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// List the built-in presets.
    #[command(args_override_self = true)]
    Presets(PresetsArgs),
    /// Run a seeded property suite.
    #[command(args_override_self = true)]
    Check(CheckArgs),
}

/// A system either from a preset or from explicit parameters.
#[derive(Args, Debug, Clone, Serialize)]
pub struct SpecArgs {
    /// Preset name (plate-delay, string-kv, beam1, beam2, string-heat-delay).
    #[arg(long)]
    pub preset: Option<String>,
    /// delay-elastic or delay-heat; required without --preset.
    #[arg(long)]
    pub variant: Option<String>,
    /// Coupling exponent beta [default: preset value].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Dissipation exponent alpha [default: preset value].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Damping coefficient a [default: 1 for delay-elastic, 2 for delay-heat].
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Delay.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// History weight [default: 2 tau / a for delay-elastic, tau a for delay-heat].
    #[arg(long)]
    pub xi: Option<f64>,
    /// Domain length L in lambda_j = (j pi / L)^p [default: 1 with a preset, pi otherwise].
    #[arg(long)]
    pub length: Option<f64>,
    /// Power p in lambda_j = (j pi / L)^p; fixed by presets [default: 4].
    #[arg(long)]
    pub power: Option<i32>,
    /// Number of modes.
    #[arg(long, default_value_t = 20)]
    pub j_max: usize,
    /// Instability probe: allow a = 0 and points outside Q.
    #[arg(long)]
    pub probe: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ResolventArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Collocation nodes on the history interval.
    #[arg(long, default_value_t = 32)]
    pub n_rho: usize,
    /// Frequencies per decade.
    #[arg(long, default_value_t = 40)]
    pub per_decade: usize,
    /// Write the full frequency sweep instead of the per-mode peaks.
    #[arg(long)]
    pub full: bool,
    /// Decades of frequency above sqrt(lambda_max) covered by --full.
    #[arg(long, default_value_t = 3.0)]
    pub decades: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Final time.
    #[arg(long = "T", default_value_t = 50.0)]
    pub t_end: f64,
    /// Time step (at most tau/8).
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Keep every k-th step in the energy CSV.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    /// Energy CSV (t, E); stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Per-mode CSV (t, j, u, v, theta).
    #[arg(long)]
    pub modes_output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// delay-elastic or delay-heat.
    #[arg(long)]
    pub variant: String,
    /// Points per side of the (beta, alpha) grid.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// History weight [default: 2 tau / a for delay-elastic, tau a for delay-heat].
    #[arg(long)]
    pub xi: Option<f64>,
    /// fast (8 modes) or thorough (20 modes).
    #[arg(long, default_value = "fast")]
    pub budget: String,
    /// Modes supplied to the budget selection.
    #[arg(long, default_value_t = 20)]
    pub j_max: usize,
    /// Power p in lambda_j = (j pi / L)^p.
    #[arg(long, default_value_t = 4)]
    pub power: i32,
    /// Domain length L.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub length: f64,
    /// Collocation nodes on the history interval.
    #[arg(long, default_value_t = 32)]
    pub n_rho: usize,
    /// Instability probe: allow a = 0 and points outside Q.
    #[arg(long)]
    pub probe: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct PresetsArgs {
    /// CSV listing (JSON on stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    /// regions, coercivity, dissipativity, oracle or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON file (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn run(argv: Vec<String>) -> Result<(), (CliError, bool)> {
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let fail = |e: CliError| (e, json_errors);
    let argv = config::expand_config(argv).map_err(fail)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            if json_errors {
                let text = e.to_string();
                let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
                return Err(fail(CliError::Validation(first)));
            }
            let _ = e.print();
            return Err((CliError::Validation(String::new()), false));
        }
    };
    let res = match &cli.command {
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Resolvent(a) => commands::resolvent(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Presets(a) => commands::presets(a),
        Command::Check(a) => commands::check(a),
    };
    res.map_err(|e| (e, cli.json_errors))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((CliError::BrokenPipe, _)) => ExitCode::SUCCESS,
        Err((e, json)) => {
            if json {
                eprintln!("{}", e.to_json());
            } else if !e.message().is_empty() {
                eprintln!("delaytherm: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
