mod common;

use common::*;
use tempfile::TempDir;

fn analyze(store: &std::path::Path, out: &std::path::Path, extra: &[&str]) -> String {
    let mut args = vec!["analyze", "--store", store.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    String::from_utf8(run_ok(&args).stdout).unwrap()
}

fn expected(name: &str) -> String {
    read(&fixture(&format!("mini/expected/{name}")))
}

#[test]
fn ingest_reports_svi_matches_and_rejections() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let manifest: serde_json::Value = serde_json::from_str(&read(&store.join("manifest.json"))).unwrap();
    assert_eq!(manifest["svi_matched"], 3);
    assert_eq!(manifest["tracts"]["records"], 4);
    let names: Vec<&str> = manifest["sets"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["pharm", "dg"]);
    let reports = manifest["reports"].as_array().unwrap();
    let tract_report = &reports[0][1];
    assert_eq!(tract_report["records_read"], 5);
    assert_eq!(tract_report["rejected"]["ethnicity-sum"], 1);
    let pharm = &reports[2][1];
    assert_eq!(pharm["records_accepted"], 3);
    assert_eq!(pharm["rejected"]["non-retail"], 1);
    assert_eq!(pharm["rejected"]["geocode-failed"], 1);
    assert_eq!(pharm["doubt_geocodes"], 1);
}

#[test]
fn golden_pharm() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let out = dir.path().join("pharm");
    let stdout = analyze(&store, &out, &["--sets", "pharm"]);
    assert_eq!(read(&out.join("coverage.csv")), expected("pharm.coverage.csv"));
    assert_eq!(read(&out.join("coverage_by_state.csv")), expected("pharm.coverage_by_state.csv"));
    assert_eq!(read(&out.join("goal.txt")), expected("pharm.goal.txt"));
    assert_eq!(stdout, expected("pharm.goal.txt"));
    distances_match(&read(&out.join("distances.csv")), &expected("pharm.distances.csv"), 1e-9).unwrap();
}

#[test]
fn golden_pharm_dg() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let out = dir.path().join("pharm_dg");
    analyze(&store, &out, &["--sets", "pharm,dg"]);
    assert_eq!(read(&out.join("coverage.csv")), expected("pharm_dg.coverage.csv"));
    assert_eq!(read(&out.join("coverage_by_state.csv")), expected("pharm_dg.coverage_by_state.csv"));
    assert_eq!(read(&out.join("goal.txt")), expected("pharm_dg.goal.txt"));
    distances_match(&read(&out.join("distances.csv")), &expected("pharm_dg.distances.csv"), 1e-9).unwrap();
}

#[test]
fn golden_conus_excludes_hawaii() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let out = dir.path().join("conus");
    analyze(&store, &out, &["--sets", "pharm", "--region", "conus", "--no-per-state"]);
    assert_eq!(read(&out.join("coverage.csv")), expected("pharm_conus.coverage.csv"));
}

#[test]
fn golden_delta_and_deciles() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let s = store.to_str().unwrap();
    let delta = run_ok(&["compare", "--store", s, "--base", "pharm", "--augmented", "pharm,dg"]).stdout;
    assert_eq!(String::from_utf8(delta).unwrap(), expected("delta.csv"));
    let hist = run_ok(&["svi-hist", "--store", s, "--sets", "pharm"]).stdout;
    assert_eq!(String::from_utf8(hist).unwrap(), expected("pharm.svi_deciles.csv"));
    let hist = run_ok(&["svi-hist", "--store", s, "--sets", "pharm,dg"]).stdout;
    assert_eq!(String::from_utf8(hist).unwrap(), expected("pharm_dg.svi_deciles.csv"));
}

#[test]
fn compare_with_itself_is_all_zero() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let out = dir.path().join("self");
    let s = store.to_str().unwrap();
    run_ok(&["compare", "--store", s, "--base", "pharm", "--augmented", "pharm", "--out", out.to_str().unwrap()]);
    let delta = read(&out.join("delta.csv"));
    for line in delta.lines().skip(1) {
        assert!(line.ends_with(",0.00"), "{line}");
    }
    let tracts = read(&out.join("tract_deltas.csv"));
    assert_eq!(tracts.lines().count(), 5);
}

#[test]
fn uniform_sites_fill_every_decile() {
    let dir = TempDir::new().unwrap();
    let store = dir.path().join("store");
    let u = |f: &str| fixture(&format!("uniform/{f}")).display().to_string();
    run_ok(&[
        "ingest",
        "--tracts",
        &u("tracts.csv"),
        "--svi",
        &u("svi.csv"),
        "--facilities",
        &format!("uni={}", u("sites.csv")),
        "--out",
        store.to_str().unwrap(),
    ]);
    let hist = String::from_utf8(run_ok(&["svi-hist", "--store", store.to_str().unwrap(), "--sets", "uni"]).stdout).unwrap();
    let rows: Vec<&str> = hist.lines().skip(1).take(10).collect();
    assert_eq!(rows.len(), 10);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(*row, format!("{},1,10.00", i + 1));
    }
}

#[test]
fn missing_tract_file_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere/tracts.csv");
    let out = run_err(&["ingest", "--tracts", missing.to_str().unwrap(), "--out", dir.path().join("s").to_str().unwrap()]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(missing.to_str().unwrap()), "{err}");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_set_and_group_fail() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let s = store.to_str().unwrap();
    let o = dir.path().join("o");
    let out = run_err(&["analyze", "--store", s, "--sets", "nope", "--out", o.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = run_err(&["analyze", "--store", s, "--sets", "pharm", "--groups", "martians", "--out", o.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("martians"));
    let out = run_err(&["analyze", "--store", s, "--sets", "pharm", "--thresholds", "5,2", "--out", o.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("thresholds"));
}

#[test]
fn tampered_store_is_refused() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let tracts = store.join("tracts.csv");
    let mut text = read(&tracts);
    text.push('\n');
    std::fs::write(&tracts, text).unwrap();
    let o = dir.path().join("o");
    run_err(&["analyze", "--store", store.to_str().unwrap(), "--sets", "pharm", "--out", o.to_str().unwrap()]);
}

#[test]
fn store_from_environment() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let out = bin()
        .env("PROXIMITY_STORE", &store)
        .args(["svi-hist", "--sets", "pharm"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected("pharm.svi_deciles.csv"));
}

#[test]
fn shipped_scenario_file_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/vaccine.json");
    let file: proximity::engine::ScenarioFile = serde_json::from_str(&read(&path)).unwrap();
    let names: Vec<_> = file.scenarios.iter().map(|s| s.name.clone().unwrap()).collect();
    assert_eq!(names, ["pharm", "pharm+dg", "pharm+dt", "pharm+state", "pharm+state+dg"]);
    for s in &file.scenarios {
        assert_eq!(s.sets.join("+"), s.name.clone().unwrap());
    }
}

#[test]
fn scenario_file_runs_against_store() {
    let dir = TempDir::new().unwrap();
    let store = ingest_mini(dir.path());
    let file = dir.path().join("s.json");
    std::fs::write(&file, r#"{"scenarios":[{"name":"both","sets":["pharm","dg"],"region":"conus","thresholds":[1,2,5]}]}"#).unwrap();
    let out = dir.path().join("o");
    let goal = analyze(&store, &out, &["--scenario-file", file.to_str().unwrap(), "--scenario", "both"]);
    assert!(goal.ends_with("-> met\n"), "{goal}");
    let analysis: serde_json::Value = serde_json::from_str(&read(&out.join("analysis.json"))).unwrap();
    assert_eq!(analysis["scenario"]["name"], "both");
    assert_eq!(analysis["scenario"]["region"], "conus");
}
