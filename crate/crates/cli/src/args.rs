//! Command-line argument definitions.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "svrpll",
    version,
    about = "Plan landmark-supported tours and fly them in simulation",
    long_about = "Generates routing instances, solves for a minimum-cost tour \
                  plus landmark placement by branch-and-cut, and verifies plans \
                  in a closed-loop bearing-only localization simulation."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance and print a validation report.
    Gen(GenArgs),
    /// Solve an instance to optimality by branch-and-cut.
    Solve(SolveArgs),
    /// Simulate a solved plan under bearing-only localization.
    Sim(SimArgs),
    /// Generate, solve, and aggregate a whole batch of instances.
    Batch(BatchArgs),
}

#[derive(Debug, Parser)]
pub struct GenArgs {
    /// Number of targets to visit (at least 3 for a tour).
    #[arg(long, value_parser = clap::value_parser!(u64).range(3..))]
    pub targets: u64,
    /// RNG seed; the same flags always produce the same file.
    #[arg(long)]
    pub seed: u64,
    /// Where to write the instance JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Side length of the square area.
    #[arg(long, default_value_t = 100.0)]
    pub grid: f64,
    /// Candidate landmark sites per target.
    #[arg(long, default_value_t = 5)]
    pub site_factor: usize,
    /// Sensing range used for cover sets.
    #[arg(long, default_value_t = 35.0)]
    pub range: f64,
}

#[derive(Debug, Parser)]
pub struct SolveArgs {
    /// Instance JSON to solve.
    #[arg(long)]
    pub instance: PathBuf,
    /// Where to write the solution JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Wall-clock budget in seconds; exit code 2 when it bites.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Weight on landmark cost in the objective.
    #[arg(long, default_value_t = 1.0)]
    pub lm_weight: f64,
}

#[derive(Debug, Parser)]
pub struct SimArgs {
    /// Instance JSON the plan belongs to.
    #[arg(long)]
    pub instance: PathBuf,
    /// Solution JSON to fly.
    #[arg(long)]
    pub solution: PathBuf,
    /// Output prefix; writes PREFIX.trace.csv, PREFIX.summary.json,
    /// PREFIX.traj.svg and PREFIX.errors.svg.
    #[arg(long)]
    pub out: PathBuf,
    /// Heading controller gain.
    #[arg(long, default_value_t = 2.0)]
    pub gain: f64,
    /// Waypoint switch distance (on the estimated position).
    #[arg(long, default_value_t = 1.0)]
    pub min_dist: f64,
    /// Bearing sensing range.
    #[arg(long, default_value_t = 35.0)]
    pub range: f64,
    /// Step budget; the run stops early once the route is complete.
    #[arg(long, default_value_t = 3000)]
    pub steps: usize,
    /// RNG seed; fixes measurement and process noise bit-for-bit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration step in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Bearing noise standard deviation in degrees.
    #[arg(long, default_value_t = 0.5)]
    pub sigma_bearing: f64,
    /// Process noise standard deviation on (v, omega).
    #[arg(long, default_value_t = 0.01)]
    pub q: f64,
}

#[derive(Debug, Parser)]
pub struct BatchArgs {
    /// Comma-separated target counts, one bucket each.
    #[arg(long, value_delimiter = ',', default_value = "15,20,25,30")]
    pub sizes: Vec<usize>,
    /// Instances per bucket.
    #[arg(long, default_value_t = 20)]
    pub per_size: usize,
    /// Base seed; instance seeds are derived from it, the size, and the
    /// index, so reports are reproducible.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    /// Concurrent instance pipelines (defaults to the number of CPUs).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Optional path for the JSON report (per-instance rows included).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-instance solve budget in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}
