#![allow(dead_code)]

pub mod synth;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proximity"))
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn proximity");
    assert!(
        out.status.success(),
        "proximity {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn run_err(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn proximity");
    assert!(!out.status.success(), "proximity {args:?} unexpectedly succeeded");
    out
}

/// Ingests the MINI fixture (sets `pharm` and `dg`) into `dir/store`.
pub fn ingest_mini(dir: &Path) -> PathBuf {
    let store = dir.join("store");
    let m = |f: &str| fixture(&format!("mini/{f}")).display().to_string();
    run_ok(&[
        "ingest",
        "--tracts",
        &m("tracts.csv"),
        "--svi",
        &m("svi.csv"),
        "--facilities",
        &format!("pharm={}", m("pharm.csv")),
        "--facilities",
        &format!("dg={}", m("dg.csv")),
        "--out",
        store.to_str().unwrap(),
    ]);
    store
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Compares a distances CSV with the expected file; miles within `tol`, all other fields exact.
pub fn distances_match(actual: &str, expected: &str, tol: f64) -> Result<(), String> {
    let a: Vec<&str> = actual.lines().collect();
    let e: Vec<&str> = expected.lines().collect();
    if a.len() != e.len() {
        return Err(format!("{} rows vs {}", a.len(), e.len()));
    }
    for (x, y) in a.iter().zip(&e) {
        let xs: Vec<&str> = x.split(',').collect();
        let ys: Vec<&str> = y.split(',').collect();
        if xs.len() != ys.len() || xs[..3] != ys[..3] {
            return Err(format!("{x:?} vs {y:?}"));
        }
        match (xs[3].parse::<f64>(), ys[3].parse::<f64>()) {
            (Ok(p), Ok(q)) if (p - q).abs() <= tol => {}
            _ if xs[3] == ys[3] => {}
            _ => return Err(format!("{x:?} vs {y:?}")),
        }
    }
    Ok(())
}
