//! End-to-end CLI checks: exit codes, determinism of generated files, and
//! the config-file override path.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perclab"))
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("perclab-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_is_deterministic() {
    let d1 = tmp("gen1");
    let d2 = tmp("gen2");
    for d in [&d1, &d2] {
        let out = bin()
            .args(["gen", "--graph", "tree(3,6)", "--out", d.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let a = std::fs::read(d1.join("tree(3,6).graph.txt")).unwrap();
    let b = std::fs::read(d2.join("tree(3,6).graph.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_graph_spec_exits_2() {
    let out = bin().args(["gen", "--graph", "blob(2)", "--out", tmp("bad").to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_cap_exits_3() {
    // 49-edge grid exceeds the enumeration cap.
    let out = bin()
        .args([
            "matrix", "--graph", "grid(5,6)", "--p", "0.5", "--source", "oracle",
            "--window-radius", "2", "--out", tmp("cap").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn thin_fit_window_exits_4() {
    let out = bin()
        .args([
            "exponent", "--graph", "itree(3)", "--p", "0.5", "--experiment", "tails",
            "--samples", "500", "--n", "16", "--fit-lo", "8", "--fit-hi", "9",
            "--out", tmp("thin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tmp("conf");
    let conf = dir.join("exp.conf");
    std::fs::write(&conf, "samples = 50\n").unwrap();
    let out = bin()
        .args([
            "sample", "--graph", "grid(4,4)", "--p", "0.5", "--samples", "99999",
            "--seed", "3", "--config", conf.to_str().unwrap(),
            "--out", dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let jsonl = std::fs::read_to_string(dir.join("grid(4,4).p0.5.obs.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 50);
}

#[test]
fn oracle_bundled_corpus_passes() {
    let out = bin()
        .args(["oracle", "--samples", "2000", "--seed", "5", "--out", tmp("oracle").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("bk-product-bound"));
    assert!(!stdout.contains("FAIL"));
}
