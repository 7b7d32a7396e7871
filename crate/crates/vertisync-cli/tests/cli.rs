use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn vertisync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vertisync")).current_dir(root()).args(args).output().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn missing_config_exits_with_two() {
    assert_eq!(vertisync(&["size"]).status.code(), Some(2));
}

#[test]
fn unknown_schema_version_is_an_error() {
    let dir = tmp("schema");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "schema_version = 9\n[network]\npreset = \"la4\"\n[fleet]\nsize = 2\n").unwrap();
    let o = vertisync(&["size", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
}

#[test]
fn size_reports_the_bound() {
    let o = vertisync(&["size", "--config", "configs/example1-size.toml", "--out", tmp("size").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("55808"), "{text}");
}

#[test]
fn reruns_write_identical_bytes() {
    let a = tmp("rerun-a");
    let b = tmp("rerun-b");
    for out in [&a, &b] {
        let o = vertisync(&[
            "simulate",
            "--config",
            "configs/la4-morning-fcfs.toml",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.csv", "seed_3/queues.csv", "seed_3/trips.csv", "seed_3/cycles.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn schedule_event_log_has_the_documented_columns() {
    let out = tmp("schedule");
    let o = vertisync(&["schedule", "--config", "configs/la12-symmetric.toml", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let log = std::fs::read_to_string(out.join("schedule.csv")).unwrap();
    assert!(log.starts_with("step,vehicle,event,od_pair,vertiport,passengers,charge\n"));
    assert!(log.contains(",takeoff,") && log.contains(",landing,"));
}
