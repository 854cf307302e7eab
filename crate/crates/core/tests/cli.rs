//! End-to-end tests of the `zeroflux` binary: subcommand behaviour, exit
//! codes (0 success / 1 failed verdict / 2 config error), and the
//! run-directory → entropy-report pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zeroflux::config::parse_config;
use zeroflux::grid::{build_grid, Field, RectDomain};
use zeroflux::io::{write_trajectory, RunMetadata};
use zeroflux::model::make_builtin;
use zeroflux::solver::{SolverConfig, Trajectory};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zeroflux"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected exit 0, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn models_lists_all_builtins() {
    let out = run_ok(&mut bin().arg("models"));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    for name in ["batch_sedimentation", "heat", "zero_flux_conservation"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
    assert!(text.contains("model.param."), "parameter schema missing");
}

#[test]
fn run_then_entropy_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("heat.cfg");
    fs::write(
        &cfg_path,
        "model.name = heat\ngrid.n = 64\nsolver.t_end = 0.2\nsolver.snapshots = 40\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("run");
    run_ok(bin().arg("run").arg(&cfg_path).arg("--out").arg(&out_dir));

    assert!(out_dir.join("run.meta").is_file());
    assert!(out_dir.join("steps.csv").is_file());
    let snapshots = fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("snap_"))
        .count();
    assert_eq!(snapshots, 42, "initial + 40 interior targets + final time");

    // Residual functionals on the produced directory: all verdicts pass.
    let out = run_ok(bin().arg("entropy").arg(&out_dir).args(["--k-count", "7"]));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("entropy: PASS"), "unexpected output:\n{text}");
    assert!(!text.contains("FAIL"), "no verdict may fail:\n{text}");
    let residuals = out_dir.join("residuals.csv");
    assert!(residuals.is_file());

    // Purity: re-invocation reproduces the identical report.
    let first = fs::read(&residuals).unwrap();
    run_ok(bin().arg("entropy").arg(&out_dir).args(["--k-count", "7"]));
    assert_eq!(first, fs::read(&residuals).unwrap());
}

#[test]
fn entropy_flags_a_boundary_violating_directory() {
    // A hand-built "trajectory" that no zero-flux run could produce: a
    // steady linear ramp whose diffusive flux B(u)_x = d leaks through both
    // walls for the whole horizon. The boundary tolerance is O(1) on the
    // default layer schedule, so the leak must integrate to something loud:
    // d = 1 over T = 50 gives |limit| ≈ 11 against a tolerance of 5.
    // The zero-total-flux verdict must fail → exit 1.
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ramp");
    let params = BTreeMap::from([("d".to_string(), 1.0)]);
    let problem = make_builtin("heat", &params).unwrap().with_horizon(50.0);
    let grid = build_grid(RectDomain::unit_interval(), vec![64]).unwrap();
    let ramp = Field::from_fn(&grid, |x| x[0]);
    let times = 21;
    let snapshots = (0..times)
        .map(|j| (50.0 * j as f64 / (times - 1) as f64, ramp.clone()))
        .collect();
    let traj = Trajectory {
        problem,
        config: SolverConfig::new(50.0),
        snapshots,
        step_log: Vec::new(),
    };
    let meta = RunMetadata {
        model_name: "heat".into(),
        model_params: params,
    };
    write_trajectory(&dir, &traj, &meta).unwrap();

    let (code, stdout, _) = exit_code(bin().arg("entropy").arg(&dir));
    assert_eq!(code, 1, "leaking boundary must exit 1\n{stdout}");
    assert!(stdout.contains("entropy: FAIL"));
    assert!(
        stdout
            .lines()
            .any(|l| l.contains("zero_total_flux") && l.contains("FAIL")),
        "zero_total_flux must be among the failures:\n{stdout}"
    );
}

#[test]
fn verify_single_criterion_passes() {
    let out = run_ok(bin().args(["verify", "--criterion", "1"]));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("steady_states_preserved: pass"), "{text}");
}

#[test]
fn verify_rejects_invalid_criterion_with_exit_2() {
    let (code, _, stderr) = exit_code(bin().args(["verify", "--criterion", "11"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown acceptance criterion"), "{stderr}");
}

#[test]
fn converge_reports_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("heat.cfg");
    fs::write(
        &cfg_path,
        "model.name = heat\ngrid.n = 16\nsolver.t_end = 0.2\n\
         suite.refinement_levels = 16 32\n",
    )
    .unwrap();
    let csv_path = tmp.path().join("table.csv");
    let out = run_ok(bin().arg("converge").arg(&cfg_path).arg("--csv").arg(&csv_path));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("convergence table"), "{text}");
    assert!(text.contains("suite: PASS"), "{text}");
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("kind,name,measured,bound,verdict"));
}

#[test]
fn config_errors_exit_2_and_list_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("broken.cfg");
    fs::write(
        &cfg_path,
        "model.name = heat\nmodel.name = batch_sedimentation\nsolver.eps = -1\nmystery = 3\n",
    )
    .unwrap();
    let (code, _, stderr) = exit_code(bin().arg("run").arg(&cfg_path));
    assert_eq!(code, 2);
    for needle in [
        "duplicate key `model.name`",
        "eps must be ≥ 0",
        "unknown key `mystery`",
        "missing required key `grid.n`",
    ] {
        assert!(stderr.contains(needle), "missing `{needle}` in:\n{stderr}");
    }
}

#[test]
fn missing_files_exit_2() {
    let (code, _, stderr) = exit_code(bin().args(["run", "/nonexistent/path.cfg"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("cannot read config"), "{stderr}");

    let (code, _, stderr) = exit_code(bin().args(["entropy", "/nonexistent/rundir"]));
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn shipped_configs_parse() {
    let dir = repo_configs();
    let mut seen = 0;
    for entry in fs::read_dir(&dir).expect("configs/ exists") {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let text = fs::read_to_string(&path).unwrap();
            let cfg = parse_config(&text)
                .unwrap_or_else(|e| panic!("{} does not parse: {e}", path.display()));
            cfg.problem()
                .unwrap_or_else(|e| panic!("{} has a bad problem: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3, "expected at least 3 shipped configs, found {seen}");
}
