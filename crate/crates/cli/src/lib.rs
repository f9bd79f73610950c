//! Library side of the `svrpll` binary: argument types, the subcommand
//! implementations, the batch pipeline, and SVG plotting. Split out so
//! integration tests can drive the pipeline in-process.

pub mod args;
pub mod batch;
pub mod commands;
pub mod plot;

/// Success, or an optimal solve.
pub const EXIT_OK: i32 = 0;
/// The solver stopped on its time or node budget.
pub const EXIT_LIMIT: i32 = 2;
/// The instance (or a supplied plan) admits no feasible tour.
pub const EXIT_INFEASIBLE: i32 = 3;
/// Bad flags or parameters.
pub const EXIT_USAGE: i32 = 64;
/// A file could not be read, parsed, or written.
pub const EXIT_IO: i32 = 74;

pub fn run(command: &args::Command) -> i32 {
    match command {
        args::Command::Gen(a) => commands::cmd_gen(a),
        args::Command::Solve(a) => commands::cmd_solve(a),
        args::Command::Sim(a) => commands::cmd_sim(a),
        args::Command::Batch(a) => commands::cmd_batch(a),
    }
}
