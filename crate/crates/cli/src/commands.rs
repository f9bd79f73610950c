//! The four subcommands. Each returns a process exit code; errors print
//! to stderr.

use std::path::Path;
use std::time::Duration;

use nalgebra::Matrix2;

use svrp_ll::bnc::{solve, SolveParams, SolveStatus};
use svrp_ll::instance::{
    compute_cover_sets, generate_instance, validate_instance, GenConfig, Instance,
};
use svrp_ll::model::{check_feasible, Solution};
use svrp_ll::sim::{error_stats, run_scenario, RunStatus, SimConfig};

use crate::args::{BatchArgs, GenArgs, SimArgs, SolveArgs};
use crate::batch::{run_batch, BatchConfig};
use crate::plot;
use crate::{EXIT_INFEASIBLE, EXIT_IO, EXIT_LIMIT, EXIT_OK, EXIT_USAGE};

fn fail_io(what: &str, err: impl std::fmt::Display) -> i32 {
    eprintln!("error: {what}: {err}");
    EXIT_IO
}

fn write_text(path: &Path, contents: &str) -> Result<(), std::io::Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)
}

pub fn cmd_gen(args: &GenArgs) -> i32 {
    let cfg = GenConfig {
        grid_side: args.grid,
        site_factor: args.site_factor,
        sensing_range: args.range,
        landmark_cost: 1.0,
    };
    let inst = match generate_instance(args.targets as usize, args.seed, &cfg) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: invalid generation parameters: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = inst.save(&args.out) {
        return fail_io("writing instance", e);
    }
    let cover = compute_cover_sets(&inst);
    let report = validate_instance(&inst, &cover);
    println!(
        "wrote {} ({} targets, {} sites, range {})",
        args.out.display(),
        inst.n_targets(),
        inst.n_sites(),
        inst.sensing_range
    );
    let min_deg = report.coverable_degree.iter().min().copied().unwrap_or(0);
    let max_deg = report.coverable_degree.iter().max().copied().unwrap_or(0);
    println!("coverable degree per target: min {min_deg}, max {max_deg}");
    if report.infeasible_certain() {
        println!(
            "warning: targets {:?} have fewer than two coverable incident edges; \
             no feasible tour exists",
            report.flagged
        );
    } else {
        println!("validation: no target rules out a tour");
    }
    EXIT_OK
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    let inst = match Instance::load(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail_io("reading instance", e),
    };
    let params = SolveParams {
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        lm_weight: args.lm_weight,
        ..SolveParams::default()
    };
    let out = match solve(&inst, &params) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: solver failed: {e}");
            return 1;
        }
    };
    let s = &out.stats;
    eprintln!(
        "{} nodes, {} subtour rows, {} pivots, best bound {:.6}, {:.3}s",
        s.nodes,
        s.cuts,
        s.lp_pivots,
        s.best_bound,
        s.elapsed.as_secs_f64()
    );
    match out.status {
        SolveStatus::Optimal => {
            let sol = out.solution.expect("optimal exit carries a solution");
            if let Err(e) = sol.save(&args.out) {
                return fail_io("writing solution", e);
            }
            println!(
                "optimal: objective {:.6} (travel {:.6} + landmarks {:.6}), {} landmarks",
                sol.objective,
                sol.travel_cost,
                sol.landmark_cost,
                sol.chosen_sites.len()
            );
            EXIT_OK
        }
        SolveStatus::LimitReached => {
            if let Some(sol) = &out.solution {
                if let Err(e) = sol.save(&args.out) {
                    return fail_io("writing incumbent", e);
                }
                println!(
                    "limit reached: best incumbent {:.6} written (bound {:.6})",
                    sol.objective, s.best_bound
                );
            } else {
                println!("limit reached before any feasible tour was found");
            }
            EXIT_LIMIT
        }
        SolveStatus::Infeasible => {
            println!("infeasible: no tour with 2-covered edges exists for this instance");
            EXIT_INFEASIBLE
        }
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = prefix.file_name().map(|n| n.to_owned()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

pub fn cmd_sim(args: &SimArgs) -> i32 {
    let inst = match Instance::load(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail_io("reading instance", e),
    };
    let sol = match Solution::load(&args.solution) {
        Ok(s) => s,
        Err(e) => return fail_io("reading solution", e),
    };
    // Refuse plans that do not fit the instance; stored costs are allowed
    // to disagree (they depend on the landmark weight used at solve time).
    let verdict = check_feasible(&inst, &sol, 1.0);
    if !verdict.structurally_feasible() {
        eprintln!("error: solution is not feasible for this instance:");
        for v in &verdict.violations {
            eprintln!("  - {v:?}");
        }
        return EXIT_INFEASIBLE;
    }

    let q = args.q * args.q;
    let cfg = SimConfig {
        dt: args.dt,
        n_steps: args.steps,
        controller_gain: args.gain,
        min_wp_distance: args.min_dist,
        sensing_range: args.range,
        process_noise: Matrix2::new(q, 0.0, 0.0, q),
        bearing_noise_std: args.sigma_bearing.to_radians(),
        rng_seed: args.seed,
        ..SimConfig::default()
    };
    let trace = match run_scenario(&sol, &inst, &cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: simulation setup failed: {e}");
            return 1;
        }
    };
    let report = error_stats(&trace);

    let summary = serde_json::json!({
        "completed": trace.completed(),
        "steps": trace.steps.len(),
        "status": match trace.status {
            RunStatus::CompletedRoute { at_step } => format!("completed at step {at_step}"),
            RunStatus::ReachedStepLimit => "step limit reached".to_string(),
        },
        "diverged_at": trace.diverged_at,
        "skipped_measurements": trace.skipped_measurements,
        "rmse": { "x": report.rmse[0], "y": report.rmse[1], "psi": report.rmse[2] },
        "containment_3sigma": {
            "x": report.containment[0],
            "y": report.containment[1],
            "psi": report.containment[2],
        },
        "mean_visible": report.mean_visible,
        "frac_two_visible": report.frac_two_visible,
    });

    let files = [
        (suffixed(&args.out, ".trace.csv"), trace.to_csv()),
        (
            suffixed(&args.out, ".summary.json"),
            serde_json::to_string_pretty(&summary).expect("summary is plain data") + "\n",
        ),
        (suffixed(&args.out, ".traj.svg"), plot::trajectory_svg(&trace)),
        (suffixed(&args.out, ".errors.svg"), plot::error_svg(&report)),
    ];
    for (path, contents) in &files {
        if let Err(e) = write_text(path, contents) {
            return fail_io(&format!("writing {}", path.display()), e);
        }
    }

    println!(
        "{} after {} steps; rmse x {:.4} y {:.4} psi {:.4}; \
         3-sigma containment {:.3}/{:.3}/{:.3}; >=2 landmarks visible {:.1}% of steps",
        if trace.completed() { "route completed" } else { "step budget exhausted" },
        trace.steps.len(),
        report.rmse[0],
        report.rmse[1],
        report.rmse[2],
        report.containment[0],
        report.containment[1],
        report.containment[2],
        100.0 * report.frac_two_visible,
    );
    if trace.diverged_at.is_some() {
        eprintln!(
            "warning: filter diverged at step {}; continued on dead reckoning",
            trace.diverged_at.unwrap()
        );
    }
    EXIT_OK
}

pub fn cmd_batch(args: &BatchArgs) -> i32 {
    if args.sizes.is_empty() || args.per_size == 0 {
        eprintln!("error: need at least one size and --per-size >= 1");
        return EXIT_USAGE;
    }
    let cfg = BatchConfig {
        sizes: args.sizes.clone(),
        per_size: args.per_size,
        seed_base: args.seed_base,
        jobs: args.jobs,
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        lm_weight: 1.0,
    };
    let report = run_batch(&cfg);
    print!("{}", report.table());
    let failures: Vec<_> =
        report.instances.iter().filter(|r| r.status.starts_with("error")).collect();
    for f in &failures {
        eprintln!("instance |V|={} seed={} failed: {}", f.size, f.seed, f.status);
    }
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report is plain data");
        if let Err(e) = write_text(out, &(json + "\n")) {
            return fail_io("writing report", e);
        }
        println!("report written to {}", out.display());
    }
    EXIT_OK
}
