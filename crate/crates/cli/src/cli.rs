use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cylbill", version, about = "Cylindric billiards on flat tori")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Run ensembles on one thread (results are identical either way).
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Residual cutoff for orthonormalization.
    #[arg(long, global = true, value_name = "X")]
    pub tol_rank: Option<f64>,
    /// Relative discriminant cutoff for tangential collisions.
    #[arg(long, global = true, value_name = "X")]
    pub disc_tol: Option<f64>,
    /// Minimal gap between consecutive collision times.
    #[arg(long, global = true, value_name = "X")]
    pub t_min_gap: Option<f64>,
    /// Initial finite-difference step.
    #[arg(long, global = true, value_name = "X")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transitivity, transverseness, commutant dimension and graph components.
    Classify {
        system: PathBuf,
    },
    /// Write a system file built from parameters.
    #[command(subcommand)]
    Build(Build),
    /// Estimate the typical dimension of W+ for a symbolic sequence.
    Delta(DeltaArgs),
    /// Like `delta`, exiting with status 1 when the sequence is not rich.
    Rich(DeltaArgs),
    /// Trace one Euclidean path.
    Trace {
        system: PathBuf,
        sigma: PathBuf,
        spec: PathBuf,
        /// Also report W+, its independent-translation variant, the neutral
        /// space and the rank of the collision data map.
        #[arg(long)]
        ranks: bool,
    },
    /// Flow one orbit on the torus.
    Simulate {
        system: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        #[arg(long, conflicts_with = "time", required_unless_present = "time")]
        collisions: Option<usize>,
        #[arg(long)]
        time: Option<f64>,
        /// Collision search horizon (default: ten fundamental-domain diameters).
        #[arg(long)]
        horizon: Option<f64>,
        /// Trajectory file (JSON).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// One event per row.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Largest Lyapunov exponent by the two-trajectory method.
    Lyapunov {
        system: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        #[arg(long, default_value_t = 1e4)]
        total_time: f64,
        #[arg(long, default_value_t = 1.0)]
        renorm_dt: f64,
        #[arg(long, default_value_t = 1e-9)]
        d0: f64,
        /// Independent random starts (requires --random).
        #[arg(long, default_value_t = 1, requires = "random")]
        runs: usize,
        /// Include every renormalization window in the report.
        #[arg(long)]
        windows: bool,
    },
    /// Fraction of random orbits whose collisions admit an orthogonal splitting.
    SplittingScan {
        system: PathBuf,
        #[arg(long, default_value_t = 200)]
        orbits: usize,
        #[arg(long, default_value_t = 200)]
        collisions: usize,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,50,100")]
        checkpoints: Vec<usize>,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Start {
    /// Phase-point file.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Uniform random start outside the cylinders.
    #[arg(long)]
    pub random: bool,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[command(flatten)]
    pub start: Start,
    /// Seed for every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Measure {
    /// Uniform direction, offsets uniform in a box.
    Box,
    /// Paths built forwards collision by collision.
    Constructive,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    pub system: PathBuf,
    pub sigma: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Measure::Box)]
    pub measure: Measure,
    /// Half-width of the offset box (default: three times the largest radius).
    #[arg(long)]
    pub box_half_width: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_attempts: usize,
}

#[derive(Debug, Subcommand)]
pub enum Build {
    /// N balls of radius r in the ν-torus, reduced by the centre of mass.
    Hardball {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        nu: usize,
        /// Defaults to unit masses.
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
        #[arg(long)]
        r: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Cylinders with the given base spaces, which must form a direct sum.
    Directsum {
        #[arg(long)]
        dim: usize,
        /// Base space as `;`-separated vectors of `,`-separated entries.
        #[arg(long = "block", required = true)]
        blocks: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        /// Ambient translation per cylinder, `;`-separated (default: zero).
        #[arg(long)]
        translations: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Factor system spanned by the base spaces of the chosen cylinders.
    Subbilliard {
        system: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}
