use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rll2d(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rll2d"));
    cmd.args(args).env_remove("RLL2D_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("run rll2d")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle_reports_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = rll2d(&["oracle", "--m", "4", "--output", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("enumeration log2Z=10.269126679149"));
    assert!(text.contains("transfer_matrix log2Z=10.269126679149"));
    assert!(text.contains("agree"));
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert!(csv.starts_with("# rll2d oracle schema v1\nmethod,m,log2_z,z,capacity\n"));
    assert!(csv.contains(",1234,"));
}

#[test]
fn validation_errors_exit_one_and_name_the_field() {
    let out = rll2d(&["capacity", "--m", "0"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("invalid m"), "{}", stderr(&out));
    let out = rll2d(&["capacity", "--unknown-flag"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = rll2d(&["capacity", "--paths", "0"], &[]);
    assert!(stderr(&out).contains("invalid paths"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = rll2d(&["oracle", "--m", "30", "--output", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("budget"));
}

#[test]
fn help_exits_zero() {
    let out = rll2d(&["--help"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("info-rate"));
}

#[test]
fn chain_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rll2d(&["chain-check", "--output", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("pass"));
    assert!(dir.path().join("chain_check.csv").exists());
}

#[test]
fn capacity_writes_manifest_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = rll2d(
        &["capacity", "--m", "6", "--k", "2000", "--paths", "2", "--seed", "7", "--output", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("capacity m=6 w=1 k=2000 paths=2 C_M="));
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    for key in ["command = capacity", "m = 6", "k = 2000", "paths = 2", "seed = 7", "burn_in = 60", "thinning = 1"] {
        assert!(manifest.contains(key), "{key} missing from\n{manifest}");
    }
    let traces = fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    for id in ["path0_A", "path0_B", "path1_A", "path1_B"] {
        assert!(traces.contains(&format!("\n{id},")));
    }
    let capacity = fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
    assert_eq!(capacity.lines().count(), 2 + 4 + 1);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary.trim_end(), stdout(&out).trim_end());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nm = 3\nj = 6\nl = 2\nk = 200\nsnr_db = 0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = rll2d(
        &["info-rate", "--config", cfg.to_str().unwrap(), "--j", "3", "--output", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("\nj = 3\n"));
    assert!(manifest.contains("\nm = 3\n"));
    assert!(stdout(&out).contains("J=3"));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = rll2d(&["oracle", "--m", "2"], &[("RLL2D_OUTPUT_DIR", &target)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("oracle.csv").exists());
}

#[test]
fn manifest_replays_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = rll2d(
        &["capacity", "--m", "5", "--k", "3000", "--seed", "42", "-w", "2", "--output", a.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let manifest = a.join("manifest.txt");
    let out = rll2d(
        &["capacity", "--config", manifest.to_str().unwrap(), "--output", b.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in ["capacity.csv", "traces.csv", "manifest.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn adding_paths_keeps_existing_ones() {
    let dir = tempfile::tempdir().unwrap();
    let run = |paths: &str, sub: &str| {
        let d = dir.path().join(sub);
        let out = rll2d(&["capacity", "--m", "4", "--k", "500", "--paths", paths, "--output", d.to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(0));
        fs::read_to_string(d.join("capacity.csv")).unwrap()
    };
    let two = run("2", "two");
    let three = run("3", "three");
    let first_two = |t: &str| -> Vec<String> {
        t.lines()
            .filter(|l| matches!(l.split(',').nth(3), Some("0") | Some("1")))
            .map(String::from)
            .collect()
    };
    assert_eq!(first_two(&two).len(), 4);
    assert_eq!(first_two(&two), first_two(&three));
}
