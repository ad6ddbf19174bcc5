use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosserat-dem")).args(args).output().expect("spawn cli")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_shows_builtin_cases() {
    let o = cli(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["patch1", "patch2", "patch3", "plate_hole", "boundary_layer", "beam_flexion", "lamb_desk"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing:\n{text}");
    }
}

#[test]
fn builtin_case_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["case", "patch1", "--output-dir", out, "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("sxx"));
    for f in ["patch1.vtk", "patch1_cells.csv", "patch1_report.json", "patch1_report.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("patch1_report.json")).unwrap()).unwrap();
    assert!(report.is_object());
}

#[test]
fn emit_restricts_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["case", "patch1", "--output-dir", dir.path().to_str().unwrap(), "--emit", "report"]);
    assert!(o.status.success());
    assert!(dir.path().join("patch1_report.txt").is_file());
    assert!(!dir.path().join("patch1.vtk").exists());
}

#[test]
fn config_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/patch3.toml");
    let o = cli(&["run", config.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap(), "--emit", "report"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_dir(dir.path()).unwrap().count() > 0);
}

#[test]
fn krylov_solver_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["case", "patch1", "--solver", "krylov", "--output-dir", dir.path().to_str().unwrap(), "--emit", "report"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_case_fails() {
    let o = cli(&["case", "no_such_case"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn bad_options_fail() {
    for args in [
        &["case", "patch1", "--solver", "cholesky"][..],
        &["case", "patch1", "--dt", "-1"][..],
        &["case", "patch1", "--emit", "png"][..],
    ] {
        let o = cli(args);
        assert!(!o.status.success(), "{args:?}");
    }
}

#[test]
fn invalid_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\n[mesh]\nkind = \"rectangle\"\nunknown_key = 1\n").unwrap();
    let o = cli(&["run", path.to_str().unwrap()]);
    assert!(!o.status.success());
}
