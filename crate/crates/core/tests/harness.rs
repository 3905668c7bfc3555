use std::process::Command;

use cermec::baselines::{solve_by_name, SCHEMES};
use cermec::harness::{
    aggregate, aggregate_path, instance, run_sweep, run_sweep_to, run_validate, write_rows_csv,
    SweepSpec, SweepVar, ROW_HEADER,
};
use cermec::mfba::SolverConfig;
use cermec::params::SystemParams;
use cermec::sysmodel::check_feasibility;

fn spec(variable: SweepVar, values: Vec<f64>, trials: usize) -> SweepSpec {
    SweepSpec {
        variable,
        values,
        trials,
        schemes: SCHEMES.iter().map(|s| s.to_string()).collect(),
        base: SystemParams::default(),
        seed: 3,
        solver: SolverConfig::default(),
    }
}

#[test]
fn rows_come_out_in_value_trial_scheme_order() {
    let rows = run_sweep(&spec(SweepVar::K, vec![2.0, 3.0], 3)).unwrap();
    assert_eq!(rows.len(), 2 * 3 * SCHEMES.len());
    let keys: Vec<_> = rows.iter().map(|r| (r.value, r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    for chunk in rows.chunks(SCHEMES.len()) {
        let names: Vec<_> = chunk.iter().map(|r| r.scheme.as_str()).collect();
        assert_eq!(names, SCHEMES);
        assert!(chunk.iter().all(|r| r.seed == chunk[0].seed));
    }
}

#[test]
fn converged_rows_replay_as_feasible() {
    let s = spec(SweepVar::PMax, vec![0.5, 1.0], 4);
    let rows = run_sweep(&s).unwrap();
    for r in rows.iter().filter(|r| r.converged) {
        let p = s.variable.apply(&s.base, r.value).unwrap();
        let (_, c) = instance(&p, r.seed).unwrap();
        let rep = solve_by_name(&r.scheme, &c, &p, &s.solver).unwrap();
        assert!(check_feasibility(&rep.alloc, &c, &p, s.solver.tol_feas).feasible);
        assert_eq!(rep.total_bits(), r.total_bits);
        if r.scheme == "FLCA" {
            assert!(rep.alloc.slot.iter().all(|&t| t == 0.0));
        }
    }
}

#[test]
fn sweep_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(SweepVar::N, vec![1.0, 2.0], 3);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let rows = run_sweep_to(&s, &a).unwrap();
    run_sweep_to(&s, &b).unwrap();
    let strip = |path: &std::path::Path| -> Vec<String> {
        let text = std::fs::read_to_string(path).unwrap();
        text.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.truncate(ROW_HEADER.len() - 1);
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(strip(&a)[0], ROW_HEADER[..ROW_HEADER.len() - 1].join(","));
    assert_eq!(
        std::fs::read(aggregate_path(&a)).unwrap(),
        std::fs::read(aggregate_path(&b)).unwrap()
    );
    let agg = aggregate(&rows);
    assert_eq!(agg.len(), 2 * SCHEMES.len());
    assert!(agg.iter().all(|g| g.trials == 3));

    let mut without = Vec::new();
    write_rows_csv(&rows, &mut without, false).unwrap();
    let text = String::from_utf8(without).unwrap();
    assert!(!text.contains("wall_ms"));
}

#[test]
fn invalid_sweeps_are_rejected() {
    assert!(run_sweep(&spec(SweepVar::K, vec![], 1)).is_err());
    assert!(run_sweep(&spec(SweepVar::K, vec![3.0, 2.0], 1)).is_err());
    let rows = run_sweep(&spec(SweepVar::K, vec![2.5], 1)).unwrap();
    assert!(rows
        .iter()
        .all(|r| r.status.starts_with("error") && !r.converged));
    let mut s = spec(SweepVar::K, vec![2.0], 1);
    s.schemes = vec!["nope".into()];
    assert!(run_sweep(&s).is_err());
}

#[test]
fn validation_rows_are_usable() {
    let rows = run_validate(2, 8, &SolverConfig::default()).unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.usable(), "{}", r.note);
        assert!(r.delta_grid.abs() <= 0.02 && r.delta_projected.abs() <= 0.02);
    }
}

#[test]
fn cli_runs_solve_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_cermec");
    let out = dir.path().join("run.csv");
    let status = Command::new(exe)
        .args(["solve", "--seed", "4", "--scheme", "nera", "--out"])
        .arg(&out)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() > 1);

    let sweep = dir.path().join("sweep.csv");
    let status = Command::new(exe)
        .args([
            "sweep",
            "--var",
            "K",
            "--values",
            "2,3",
            "--trials",
            "2",
            "--scheme",
            "MFBA,FLCA",
            "--out",
        ])
        .arg(&sweep)
        .env("CERMEC_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read_to_string(&sweep).unwrap().lines().count(),
        1 + 2 * 2 * 2
    );
    assert!(aggregate_path(&sweep).exists());

    let bad = Command::new(exe)
        .args(["sweep", "--var", "Q", "--values", "1"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
