mod common;

use std::process::Command;

use common::crate_dir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frameguide"))
}

fn scenarios() -> String {
    crate_dir().join("scenarios/canonical.toml").display().to_string()
}

#[test]
fn validate_lists_shipped_scenarios() {
    let out = bin().args(["validate", &scenarios()]).output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("9 scenario(s) ok") && s.contains("canonical_1d"), "{s}");
}

#[test]
fn validate_reports_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "schema_version = 1\n[[scenario]]\nid = \n").unwrap();
    let out = bin().arg("validate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("line 3"), "{err}");
}

#[test]
fn generate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("traj.csv");
    let out = bin()
        .args(["generate", "-s", &scenarios(), "--scenario", "canonical_1d", "--seed", "2", "-o"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 33);
    assert!(String::from_utf8_lossy(&out.stdout).contains("wholistic  1.000000"));
}

#[test]
fn bench_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for (i, serial) in [false, true].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let mut cmd = bin();
        cmd.args(["bench", "-c"])
            .arg(crate_dir().join("configs/default.toml"))
            .args(["--seeds", "0,1", "--modes", "ours_anchored,prompt_interpolation", "-o"])
            .arg(&out_dir);
        if serial {
            cmd.arg("--serial");
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
        assert!(csv.starts_with("# generated_at="));
        bodies.push(csv.lines().skip(1).collect::<Vec<_>>().join("\n"));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0].lines().count(), 1 + 9 * 2 * 2);
}

#[test]
fn sweep_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "-s", &scenarios(), "--knob", "tau", "--values", "0,5", "--seeds", "0"])
        .args(["--modes", "ours_anchored", "--no-timestamp", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("# sweep\nknob,value,config_hash,"), "{csv}");
    assert!(dir.path().join("sweep.json").exists());

    let bad = bin().args(["bench", "-s", &scenarios(), "--tau", "99"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn failing_cells_set_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.toml");
    std::fs::write(
        &s,
        "schema_version = 1\n[[scenario]]\nid = \"x\"\ncategory = \"age\"\nframes = 4\ndim = 1\n\
         initial = { mean = -1.0, var = 0.1 }\nfinal = { mean = 1.0, var = 0.1 }\n",
    )
    .unwrap();
    let out = bin()
        .args(["bench", "--seeds", "0", "--modes", "ours_anchored", "-s"])
        .arg(&s)
        .arg("-o")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("o/report.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains("neutral"));
}
