//! End-to-end checks of the `svrpll` binary: exit codes, output files, and
//! determinism of the gen → solve → sim pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use svrp_ll::instance::Instance;
use svrp_ll::model::check_feasible;

fn svrpll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svrpll"))
        .args(args)
        .output()
        .expect("failed to spawn svrpll")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("svrpll was killed by a signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Generates the small pinned instance every pipeline test builds on:
/// 6 targets on a 50-unit grid, seed 0 (feasible, optimum ~93.37).
fn pinned_instance(dir: &Path) -> PathBuf {
    let path = dir.join("inst.json");
    let out = svrpll(&[
        "gen",
        "--targets",
        "6",
        "--seed",
        "0",
        "--grid",
        "50",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "gen failed: {}", stdout(&out));
    path
}

fn solve_pinned(dir: &Path, inst: &Path) -> PathBuf {
    let sol = dir.join("sol.json");
    let out = svrpll(&[
        "solve",
        "--instance",
        inst.to_str().unwrap(),
        "--out",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "solve failed: {}", stdout(&out));
    sol
}

#[test]
fn usage_errors_exit_64() {
    let out = svrpll(&["gen", "--targets", "2", "--out", "/tmp/never.json"]);
    assert_eq!(code(&out), 64);
    let out = svrpll(&["solve", "--no-such-flag"]);
    assert_eq!(code(&out), 64);
    let out = svrpll(&["frobnicate"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn missing_files_exit_74() {
    let dir = tempfile::tempdir().unwrap();
    let out = svrpll(&[
        "solve",
        "--instance",
        "/no/such/instance.json",
        "--out",
        dir.path().join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 74);

    let out = svrpll(&[
        "sim",
        "--instance",
        "/no/such/instance.json",
        "--solution",
        "/no/such/solution.json",
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 74);
}

#[test]
fn gen_depends_only_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    for (path, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let out = svrpll(&[
            "gen",
            "--targets",
            "8",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn solve_writes_a_verifiable_solution() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = pinned_instance(dir.path());
    let sol_path = dir.path().join("sol.json");
    let out = svrpll(&[
        "solve",
        "--instance",
        inst_path.to_str().unwrap(),
        "--out",
        sol_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("optimal"));

    let inst = Instance::load(&inst_path).unwrap();
    let sol: svrp_ll::model::Solution =
        serde_json::from_str(&fs::read_to_string(&sol_path).unwrap()).unwrap();
    assert!((sol.objective - 93.368340).abs() < 1e-4);
    assert_eq!(sol.visit_order.first(), Some(&0));
    assert_eq!(sol.visit_order.last(), Some(&0));
    let verdict = check_feasible(&inst, &sol, 1.0);
    assert!(verdict.structurally_feasible(), "{:?}", verdict.violations);
}

#[test]
fn provably_uncoverable_instance_exits_3() {
    // Four far-apart targets and no candidate sites: every edge lacks the
    // two covering landmarks it needs, so no tour can exist.
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bare.json");
    fs::write(
        &inst,
        r#"{"targets":[[0,0],[200,0],[200,200],[0,200]],
            "sites":[],"sensing_range":35.0,"landmark_cost":[],"seed":9}"#,
    )
    .unwrap();
    let out = svrpll(&[
        "solve",
        "--instance",
        inst.to_str().unwrap(),
        "--out",
        dir.path().join("sol.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("infeasible"));
}

#[test]
fn expired_time_limit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("big.json");
    let out = svrpll(&[
        "gen",
        "--targets",
        "25",
        "--seed",
        "25000",
        "--out",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let out = svrpll(&[
        "solve",
        "--instance",
        inst.to_str().unwrap(),
        "--out",
        dir.path().join("sol.json").to_str().unwrap(),
        "--time-limit",
        "0.000001",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("limit"));
}

#[test]
fn sim_writes_trace_summary_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pinned_instance(dir.path());
    let sol = solve_pinned(dir.path(), &inst);
    let prefix = dir.path().join("run");
    let out = svrpll(&[
        "sim",
        "--instance",
        inst.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    let trace = fs::read_to_string(dir.path().join("run.trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert_eq!(header, "step,t,x,y,psi,xe,ye,psie,sxx,syy,spp,n_vis,wp,omega");
    assert!(trace.lines().count() > 100);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["completed"], serde_json::Value::Bool(true));
    assert!(summary["rmse"]["x"].as_f64().unwrap() < 1.0);

    for plot in ["run.traj.svg", "run.errors.svg"] {
        let svg = fs::read_to_string(dir.path().join(plot)).unwrap();
        assert!(svg.starts_with("<svg"), "{plot} is not an svg");
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn sim_refuses_a_solution_that_fails_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pinned_instance(dir.path());
    let sol = solve_pinned(dir.path(), &inst);

    // Strip the equipped landmarks; the tour edges lose their coverage.
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    doc["sites"] = serde_json::json!([]);
    let broken = dir.path().join("broken.json");
    fs::write(&broken, serde_json::to_string(&doc).unwrap()).unwrap();

    let out = svrpll(&[
        "sim",
        "--instance",
        inst.to_str().unwrap(),
        "--solution",
        broken.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn near_zero_noise_tracks_the_route_tightly() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pinned_instance(dir.path());
    let sol = solve_pinned(dir.path(), &inst);
    let prefix = dir.path().join("quiet");
    // 5.73e-5 degrees ≈ 1e-6 rad of bearing noise, zero process noise.
    let out = svrpll(&[
        "sim",
        "--instance",
        inst.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
        "--sigma-bearing",
        "0.0000573",
        "--q",
        "0",
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("quiet.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["completed"], serde_json::Value::Bool(true));
    assert!(summary["rmse"]["x"].as_f64().unwrap() < 1e-3);
    assert!(summary["rmse"]["y"].as_f64().unwrap() < 1e-3);
}

#[test]
fn batch_reports_every_requested_run() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let out = svrpll(&[
        "batch",
        "--sizes",
        "6",
        "--per-size",
        "2",
        "--seed-base",
        "0",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["buckets"].as_array().unwrap().len(), 1);
    assert_eq!(report["buckets"][0]["size"], serde_json::json!(6));
    assert_eq!(report["buckets"][0]["count"], serde_json::json!(2));
    assert_eq!(report["instances"].as_array().unwrap().len(), 2);
    // The human-readable table goes to stdout.
    assert!(stdout(&out).contains("|V|"));
    assert!(stdout(&out).contains("median solve time"));
}
