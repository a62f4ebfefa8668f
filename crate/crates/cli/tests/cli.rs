use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
[model]
kind = "monodomain"

[mesh]
kind = "cartesian"
cells = [16, 16]
extent = [8.0, 8.0]

[sdc]
dt = 0.1
end_time = 0.5
tol = 1e-4

[stimulus]
kind = "ball"
center = [0.0, 0.0]
radius = 1.5
value = 0.5

[output]
snapshot_every = 2
"#;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cardiac-sdc"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("case.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path
}

#[test]
fn run_writes_snapshots_stats_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let result = cli().arg("run").arg(&config).arg("--out").arg(&out).output().unwrap();
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let mut vtk: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".vtk"))
        .collect();
    vtk.sort();
    assert_eq!(vtk, ["snapshot_000000.vtk", "snapshot_000002.vtk", "snapshot_000004.vtk", "snapshot_000005.vtk"]);
    let csv = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    assert!(csv.starts_with("step,t,sweeps,dofs_sweep_1"));
    assert_eq!(csv.lines().count(), 6);
    let lines = std::fs::read_to_string(out.join("run.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("plain");
    let result = cli()
        .args(["run", config.to_str().unwrap(), "--no-adapt", "--tol", "1e-6", "--snapshots", "0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(!out.join("snapshot_000000.vtk").exists());
    let csv = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    // Without adaptivity every sweep works on all 289 dofs.
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let sweeps: usize = fields[2].parse().unwrap();
        for f in &fields[3..3 + sweeps] {
            assert_eq!(*f, "289");
        }
    }
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("bench");
    let result = cli().arg("bench").arg(&config).arg("--out").arg(&out).output().unwrap();
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    for key in ["wall_adaptive_ms", "wall_baseline_ms", "speedup", "final_state_max_diff"] {
        assert!(report[key].is_number(), "{key}");
    }
}

#[test]
fn invalid_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cli().args(["run", "/nonexistent/case.toml"]).output().unwrap();
    assert!(!missing.status.success());
    let config = write_config(dir.path());
    let bad_tol = cli().arg("run").arg(&config).args(["--tol", "-1"]).output().unwrap();
    assert!(!bad_tol.status.success());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, CONFIG.replace("[sdc]", "[sdc]\nunknown = 1")).unwrap();
    let unknown = cli().arg("run").arg(&bad).output().unwrap();
    assert!(!unknown.status.success());
}
