//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermoporo"))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn check_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("check").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(dir.path().join("check.txt")).unwrap();
    assert!(text.contains("0 failed"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn unknown_command_prints_usage() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown command"), "{err}");
    assert!(err.to_lowercase().contains("usage") || err.contains("--help"), "{err}");
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "command = \"run\"\ntheta = 3\n[params]\npoisson = 0.7\nbogus = 1\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("theta") && err.contains("oisson") && err.contains("bogus"), "{err}");
}

#[test]
fn spatial_study_table_shape_and_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "command = \"converge-space\"\ncase = \"test1\"\nt_final = 0.25\n[mesh]\nn_list = [2, 4, 8, 16]\n",
    )
    .unwrap();
    let run = |o: &str| {
        let out = dir.path().join(o);
        let st = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(st.success());
        out
    };
    let (a, b) = (run("a"), run("b"));
    let csv = fs::read_to_string(a.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0].split(',').count(), 13);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 13));
    assert_eq!(fs::read_to_string(a.join("config.toml")).unwrap(), fs::read_to_string(&cfg).unwrap());
    assert!(a.join("effective_config.toml").exists() && a.join("provenance.log").exists());
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta.len(), tb.len());
    for ((na, ca), (nb, cb)) in ta.iter().zip(&tb) {
        assert_eq!(na, nb);
        // The effective config records the output directory itself.
        if !na.ends_with("effective_config.toml") && !na.ends_with("provenance.log") {
            assert!(ca == cb, "{na} differs between reruns");
        }
    }
}

#[test]
fn run_writes_log_errors_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "command = \"run\"\ncase = \"test2\"\nt_final = 0.1\n[mesh]\nn = 4\n[time]\ndt = 0.025\n").unwrap();
    let st = bin()
        .args(["--jobs", "1", "--snapshot-every", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(st.success());
    let o = dir.path().join("o");
    let log = fs::read_to_string(o.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 5);
    assert!(o.join("errors.csv").exists());
    for n in [0, 2, 4] {
        assert!(o.join(format!("snapshots/step{n:06}_p.csv")).exists());
    }
}
