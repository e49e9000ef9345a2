//! The `twolevel` binary: verbs, exit codes and output files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn twolevel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twolevel"))
        .args(args)
        .current_dir(dir)
        .env_remove("TWOLEVEL_OUT_DIR")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn generated_instance_runs_to_exit_zero_and_compares() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = twolevel(&["gen", "toy", "--out", "toy.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("toy.json").exists());

    for solver in ["two_level", "penalty"] {
        let cfg = write(
            d,
            &format!("{solver}.json"),
            &format!(r#"{{"problem": {{"file": "toy.json"}}, "solver": "{solver}", "name": "{solver}"}}"#),
        );
        let out = twolevel(&["run", &cfg, "--out-dir", "out"], d);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        for ext in ["summary.json", "trace.csv", "config.json"] {
            assert!(d.join("out").join(format!("{solver}.{ext}")).exists(), "{solver}.{ext}");
        }
    }
    let out = twolevel(&["compare", "out/two_level.summary.json", "out/penalty.summary.json"], d);
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("two_level") && table.contains("penalty"), "{table}");

    let out = twolevel(&["compare", "out/two_level.summary.json"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_follow_the_solve_status() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let infeasible = write(
        d,
        "inf.json",
        r#"{"problem": {"family": "infeasible", "params": {"n": 2}}, "solver": "two_level"}"#,
    );
    assert_eq!(twolevel(&["run", &infeasible, "--out-dir", "o"], d).status.code(), Some(2));

    let starved = write(
        d,
        "starved.json",
        r#"{"problem": {"family": "sphere", "params": {"n_p": 6}}, "solver": "two_level",
            "outer": {"max_outer": 1, "eps": 1e-9}}"#,
    );
    assert_eq!(twolevel(&["run", &starved, "--out-dir", "o"], d).status.code(), Some(3));

    let bad = write(d, "bad.json", r#"{"problem": {"family": "toy"}, "solver": "two_level", "outer": {"eps": "x"}}"#);
    let out = twolevel(&["run", &bad], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outer.eps"));
}

#[test]
fn out_dir_comes_from_the_environment_when_not_given() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "toy.json", r#"{"problem": {"family": "toy"}, "solver": "two_level", "name": "t"}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_twolevel"))
        .args(["run", &cfg])
        .current_dir(d)
        .env("TWOLEVEL_OUT_DIR", d.join("from_env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("from_env/t.summary.json").exists());
}
