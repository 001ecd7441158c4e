//! `gsp`: run, compare and generate generalized saddle point problems.
//!
//! Exit status is 0 when every solver converged, 2 when at least one did not,
//! and 1 on usage or input errors.

mod driver;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gsp_core::io::save_problem;
use gsp_core::problems::{gen_random, gen_stokes_channel, RandomSpec, Spectrum, StokesSpec, WindField};
use gsp_core::GspError;

use manifest::RunManifest;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(GspError),
}

impl From<GspError> for Failure {
    fn from(e: GspError) -> Self {
        Self::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Core(e.into())
    }
}

#[derive(Parser)]
#[command(name = "gsp", version, about = "Krylov solvers for generalized saddle point systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run each solver of a manifest and write histories and a summary.
    Run { manifest: PathBuf },
    /// Like `run`, then write comparison.txt and comparison.csv. Needs two or more solvers.
    Compare { manifest: PathBuf },
    /// Write a generated instance as Matrix Market files plus problem.json.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Subcommand)]
enum GenKind {
    Random(RandomArgs),
    Stokes(StokesArgs),
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Eigenvalue range of the symmetric part of M.
    #[arg(long, default_value_t = 1.0)]
    lo: f64,
    #[arg(long, default_value_t = 2.0)]
    hi: f64,
    /// Skew-symmetric perturbation of M; 0 keeps M symmetric.
    #[arg(long, default_value_t = 0.0)]
    skew: f64,
    #[arg(long, default_value_t = 0)]
    c_rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Wind {
    None,
    Uniform,
    Poiseuille,
    Recirculating,
}

#[derive(Args)]
struct StokesArgs {
    #[arg(long, default_value_t = 16)]
    nx: usize,
    #[arg(long, default_value_t = 16)]
    ny: usize,
    #[arg(long, default_value_t = 1.0)]
    length: f64,
    #[arg(long, default_value_t = 1.0)]
    viscosity: f64,
    /// Pressure stabilization weight.
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = Wind::None)]
    wind: Wind,
    /// Strength for poiseuille/recirculating, x component for uniform.
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
    /// y component of a uniform wind.
    #[arg(long, default_value_t = 0.0)]
    wy: f64,
    #[arg(short, long)]
    out: PathBuf,
}

fn run(manifest: &Path, compare: bool) -> Result<bool, Failure> {
    let m = RunManifest::load(manifest).map_err(Failure::Usage)?;
    m.check_solvers(if compare { 2 } else { 1 }).map_err(Failure::Usage)?;
    let inst = driver::build_instance(&m)?;
    let outcome = driver::execute(&m, &inst)?;
    if compare {
        driver::write_comparison(&m, &outcome)?;
    }
    Ok(outcome.all_converged())
}

fn generate(kind: GenKind) -> Result<bool, Failure> {
    let path = match kind {
        GenKind::Random(a) => {
            let spec = RandomSpec {
                m: a.m,
                n: a.n,
                density: a.density,
                spectrum: Spectrum::Uniform { lo: a.lo, hi: a.hi },
                skew_strength: a.skew,
                c_rank: a.c_rank,
                seed: a.seed,
            };
            save_problem(&a.out, &gen_random(&spec)?, None)?
        }
        GenKind::Stokes(a) => {
            let wind = match a.wind {
                Wind::None => None,
                Wind::Uniform => Some(WindField::Uniform { wx: a.strength, wy: a.wy }),
                Wind::Poiseuille => Some(WindField::Poiseuille { strength: a.strength }),
                Wind::Recirculating => Some(WindField::Recirculating { strength: a.strength }),
            };
            let spec = StokesSpec {
                nx: a.nx,
                ny: a.ny,
                length: a.length,
                viscosity: a.viscosity,
                gamma: a.gamma,
                wind,
            };
            let p = gen_stokes_channel(&spec)?;
            save_problem(&a.out, &p.system, Some(&p.preconditioner))?
        }
    };
    println!("{}", path.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { manifest } => run(&manifest, false),
        Command::Compare { manifest } => run(&manifest, true),
        Command::Gen { kind } => generate(kind),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(msg)) => {
            eprintln!("gsp: usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("gsp: {e}");
            ExitCode::from(1)
        }
    }
}
