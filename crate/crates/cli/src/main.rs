use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod input;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "berkdyn", version, about = "Potentials, equilibrium measures and sweeps on Berkovich projective lines")]
pub struct Cli {
    /// JSON config. Sweeps read a full sweep config; other commands take missing inputs from it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub out: OutFormat,
    /// Seed for every random choice (sample points, random trees).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Write results here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// λ_φ at a list of points.
    Green {
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        place: Option<String>,
        /// JSON list of points, or of {"id": .., "point": ..} objects.
        #[arg(long)]
        points: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Equilibrium measure from preimages (arch) or on a skeleton (nonarch).
    Equilibrium {
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        place: Option<String>,
        #[arg(long, value_enum, default_value = "arch")]
        mode: Mode,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Base point of the preimage tree, e.g. 2+0i.
        #[arg(long = "seed-point", default_value = "2+0i")]
        seed_point: String,
        #[arg(long)]
        skeleton: Option<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Rounds of edge refinement at kinks of λ_φ.
        #[arg(long, default_value_t = 2)]
        refine: usize,
    },
    /// Integrals against χ_{c,ρ} along a grid of places.
    SweepChi,
    /// Integrals against equilibrium measures along a grid of places.
    SweepEq,
    /// Ratios of successive écarts of λ_n on a circle sample.
    Contraction {
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        place: Option<String>,
        #[arg(long, default_value = "0+0i")]
        center: String,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        levels: usize,
        /// Also use this many random points in the annulus 1/2 <= |z| <= 2.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
    /// Metric graph utilities.
    Graph {
        #[command(subcommand)]
        action: GraphCommand,
    },
    /// Energy pairing of the equilibrium measures of two maps.
    Pairing {
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        map2: Option<String>,
        #[arg(long)]
        place: Option<String>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long = "seed-point", default_value = "2+0i")]
        seed_point: String,
        #[arg(long)]
        skeleton: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Arch,
    Nonarch,
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Convex hull of points on the Berkovich line as a metric tree.
    Skeleton {
        #[arg(long)]
        place: Option<String>,
        #[arg(long)]
        points: Option<String>,
    },
    /// Laplacian of a PL function given by its vertex values.
    Laplacian {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        values: String,
    },
    /// Harmonic extension of boundary values, e.g. {"0": "1", "3": "-1/2"}.
    Dirichlet {
        #[arg(long)]
        graph: String,
        #[arg(long = "boundary-values")]
        boundary_values: String,
    },
    /// Laplacian mass of a region against its bound.
    Mass {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        values: String,
        /// Comma-separated vertex ids.
        #[arg(long)]
        region: String,
        #[arg(long)]
        ell: String,
    },
    /// A random tree with rational edge lengths.
    RandomTree {
        #[arg(long, default_value_t = 10)]
        vertices: usize,
    },
}

fn exit_code(e: &berkdyn::Error) -> u8 {
    match e {
        berkdyn::Error::Numeric(_) | berkdyn::Error::Unsupported(_) => 3,
        berkdyn::Error::Domain(_) | berkdyn::Error::Parse(_) | berkdyn::Error::Io(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut buf = Vec::new();
    match commands::run(&cli, &mut buf) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("berkdyn: {e}");
            return ExitCode::from(exit_code(&e));
        }
    }
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &buf),
        None => std::io::stdout().write_all(&buf),
    };
    if let Err(e) = written {
        eprintln!("berkdyn: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
