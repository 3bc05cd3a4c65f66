//! Exit codes, dry runs and byte-identical reruns of the `sim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aerosim::output::{verify_manifest, Manifest, MANIFEST_FILE};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn sim(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sim"));
    cmd.args(args).env_remove("AEROSIM_WORKERS");
    if let Some(w) = workers {
        cmd.env("AEROSIM_WORKERS", w);
    }
    cmd.output().expect("sim runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn baseline_with(from: &str, to: &str, dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("baseline.toml")).unwrap();
    assert!(text.contains(from), "baseline has {from:?}");
    let path = dir.join("edited.toml");
    std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn dry_run_accepts_every_shipped_config() {
    let base = configs().join("baseline.toml");
    let base = base.to_str().unwrap();
    for exp in ["dl_cdf", "ul_sweep", "pc_sweep", "partition", "pathloss_curves", "fragmentation", "handover", "aerial_id"] {
        let o = sim(&[exp, "--config", base, "--dry-run"], None);
        assert_eq!(code(&o), 0, "{exp}: {}", stderr(&o));
    }
    let walls = configs().join("walls.toml");
    let o = sim(&["los_curve", "--config", walls.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let base = configs().join("baseline.toml");
    let o = sim(&["pathloss_curves", "--config", base.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(code(&o), 0);
    assert!(!out.exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = configs().join("baseline.toml");
    let base = base.to_str().unwrap();

    let o = sim(&["no_such_experiment", "--config", base, "--dry-run"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown experiment"));

    let missing = dir.path().join("missing.toml");
    let o = sim(&["dl_cdf", "--config", missing.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(code(&o), 1);

    let o = sim(&["dl_cdf"], None);
    assert_eq!(code(&o), 1, "usage error");

    let bad = baseline_with("resource_utilization = 0.2", "resource_utilization = 1.5", dir.path());
    let o = sim(&["dl_cdf", "--config", bad.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("downlink.resource_utilization"), "{}", stderr(&o));

    let bad = baseline_with("isd_m = 1732.0", "isd_m = 1732.0\nisd_km = 1.732", dir.path());
    let o = sim(&["dl_cdf", "--config", bad.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("isd_km"), "{}", stderr(&o));

    let o = sim(&["los_curve", "--config", base, "--dry-run"], None);
    assert_eq!(code(&o), 1, "los_curve without terrain");
}

#[test]
fn empty_config_lists_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let o = sim(&["dl_cdf", "--config", empty.to_str().unwrap(), "--dry-run"], None);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    for key in ["scenario", "seeds", "layout", "antenna", "channel"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let base = configs().join("baseline.toml");
    let o = sim(&["pathloss_curves", "--config", base.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let walls = configs().join("walls.toml");
    let base = configs().join("baseline.toml");
    for (exp, cfg) in [("los_curve", &walls), ("pathloss_curves", &base), ("aerial_id", &base)] {
        let mut manifests = Vec::new();
        for workers in ["1", "2", "1"] {
            let out = dir.path().join(format!("{exp}_{workers}_{}", manifests.len()));
            let o = sim(&[exp, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], Some(workers));
            assert_eq!(code(&o), 0, "{exp}: {}", stderr(&o));
            let m = manifest(&out);
            assert!(verify_manifest(&out, &m).unwrap());
            assert!(out.join("metadata.json").exists());
            manifests.push(m);
        }
        assert!(!manifests[0].files.is_empty());
        assert_eq!(manifests[0], manifests[1], "{exp}: 1 vs 2 workers");
        assert_eq!(manifests[0], manifests[2], "{exp}: rerun");
    }
}

#[test]
fn stdout_lists_each_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let base = configs().join("baseline.toml");
    let o = sim(&["pathloss_curves", "--config", base.to_str().unwrap(), "--out", out.to_str().unwrap()], Some("1"));
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    for f in manifest(&out).files {
        assert!(stdout.contains(&f.sha256), "{} not printed", f.file);
    }
}
