//! `bardina` command-line driver.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 configuration error,
//! 3 numerical blow-up, 4 certification failure.

mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "bardina",
    version,
    about = "Damped Euler-Bardina flows on the sphere and the bounds that control them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configured run, writing diagnostics.csv and final.checkpoint.
    Simulate(SimulateArgs),
    /// Estimate cumulative Lyapunov sums and compare with the dimension bound.
    Lyapunov(LyapunovArgs),
    /// Print the attractor-dimension bound as CSV (alpha, gamma, norm, bound).
    Bound(BoundArgs),
    /// Certify the series and collective Sobolev inequalities.
    Inequalities(InequalitiesArgs),
    /// Check the spherical-harmonic identities at random points.
    IdentityCheck(IdentityArgs),
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest relative slack accepted.
    #[arg(long, default_value_t = -1e-8, allow_negative_numbers = true)]
    tolerance: f64,
    /// Start from a checkpoint instead of the seeded initial state.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct LyapunovArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of tangent directions.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Averaging time after the transient.
    #[arg(long, default_value_t = 20.0)]
    t_avg: f64,
    /// Transient discarded before averaging (default 10/gamma).
    #[arg(long)]
    t_transient: Option<f64>,
    #[arg(long, default_value_t = 10)]
    ortho_every: usize,
    #[arg(long, default_value_t = 4)]
    windows: usize,
    /// Allowed violation of the pointwise trace estimate, relative to gamma*n.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DomainArg {
    Sphere,
    Subdomain,
}

#[derive(Debug, clap::Args)]
struct BoundArgs {
    /// Take alpha, gamma and forcing from a run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One or more values, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Forcing mode `n:k:amplitude`; repeatable.
    #[arg(long)]
    forcing: Vec<String>,
    #[arg(long, value_enum, default_value = "sphere")]
    domain: DomainArg,
    /// Also write bound.csv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct InequalitiesArgs {
    #[arg(long, default_value_t = 1e-3)]
    m_min: f64,
    #[arg(long, default_value_t = 1e3)]
    m_max: f64,
    /// Log-spaced points for the F sweep.
    #[arg(long, default_value_t = 200)]
    m_points: usize,
    /// Evenly spaced points for the remainder sweep on [sqrt 2, 100].
    #[arg(long, default_value_t = 200)]
    r_points: usize,
    /// Random orthonormal families, split over the vector, scalar and alpha forms.
    #[arg(long, default_value_t = 500)]
    draws: usize,
    #[arg(long, default_value_t = 21)]
    trunc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest absolute slack accepted.
    #[arg(long, default_value_t = -1e-10, allow_negative_numbers = true)]
    tolerance: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Multiplies every right-hand side; values below 1 exercise the failure path.
    #[arg(long, default_value_t = 1.0, hide = true)]
    fault_scale: f64,
}

#[derive(Debug, clap::Args)]
struct IdentityArgs {
    /// Highest degree checked.
    #[arg(long, default_value_t = 20)]
    trunc: usize,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest absolute residual accepted for the value identity.
    #[arg(long, default_value_t = 1e-11)]
    tolerance: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Lyapunov(a) => commands::lyapunov(a),
        Command::Bound(a) => commands::bound(a),
        Command::Inequalities(a) => commands::inequalities(a),
        Command::IdentityCheck(a) => commands::identity_check(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
