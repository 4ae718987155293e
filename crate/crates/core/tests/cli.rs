use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn iongyro(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iongyro"))
        .args(args)
        .current_dir(dir)
        .env_remove("IONGYRO_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn modes_json_is_parseable() {
    let tmp = tempfile::tempdir().unwrap();
    let o = iongyro(tmp.path(), &["--json", "--set", "trap_voltage_v=10", "modes"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let text = v.to_string();
    assert!(text.contains("omega_z") || text.contains("f_z"), "{text}");
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "--seed".to_string(),
            "7".into(),
            "--set".into(),
            "n_ions=40".into(),
            "--output-dir".into(),
            d.to_str().unwrap().into(),
            "crystal".into(),
        ]
    };
    for d in [a.path(), b.path()] {
        let argv = args(d);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let o = iongyro(d, &argv);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = |d: &Path| fs::read(d.join("crystal.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));
    // the report lists absolute output paths, which differ by directory
    let report = |d: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("crystal_report.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("files");
        v
    };
    assert_eq!(report(a.path()), report(b.path()));
}

#[test]
fn figure_files_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = iongyro(d, &["--output-dir", d.to_str().unwrap(), "fig", "2"]);
        assert!(o.status.success());
    }
    let x = fs::read(a.path().join("fig2_trajectory.csv")).unwrap();
    let y = fs::read(b.path().join("fig2_trajectory.csv")).unwrap();
    assert_eq!(x, y);
    let header = String::from_utf8_lossy(&x);
    assert!(header.lines().next().unwrap().starts_with("t,x,y,z"));
}

#[test]
fn output_dir_from_environment() {
    let work = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_iongyro"))
        .args(["budget"])
        .current_dir(work.path())
        .env("IONGYRO_OUTPUT_DIR", out.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.path().join("budget.json").is_file());
    assert!(!work.path().join("budget.json").exists());
}

#[test]
fn budget_json_has_schema_version() {
    let tmp = tempfile::tempdir().unwrap();
    let o = iongyro(tmp.path(), &["--json", "budget"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    let file: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("budget.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let unstable = iongyro(tmp.path(), &["--set", "trap_voltage_v=500", "modes"]);
    assert_eq!(unstable.status.code(), Some(2));
    assert!(!unstable.stderr.is_empty());

    let bad_fig = iongyro(tmp.path(), &["fig", "7"]);
    assert_eq!(bad_fig.status.code(), Some(2));

    let unknown = iongyro(tmp.path(), &["--set", "no_such_key=1", "modes"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("no_such_key"));

    let empty = iongyro(tmp.path(), &["--set", "tau_s=", "budget"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("tau_s"));

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "trap_voltage_v = ten\n").unwrap();
    let parse = iongyro(tmp.path(), &["--config", cfg.to_str().unwrap(), "modes"]);
    assert_eq!(parse.status.code(), Some(2));
}

#[test]
fn unconverged_relaxation_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = iongyro(
        tmp.path(),
        &["--set", "n_ions=50", "--set", "relax_max_iterations=2", "--set", "relax_restarts=0", "crystal"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("crystal_report.json").is_file());
}

#[test]
fn config_round_trips_through_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = iongyro(tmp.path(), &["--set", "b_field_t=2", "config"]);
    assert!(o.status.success());
    let path = tmp.path().join("run.cfg");
    fs::write(&path, stdout(&o)).unwrap();
    let again = iongyro(tmp.path(), &["--config", path.to_str().unwrap(), "config"]);
    assert!(again.status.success());
    assert_eq!(stdout(&o), stdout(&again));
}
