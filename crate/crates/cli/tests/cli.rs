use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dilate-forge"))
        .args(args)
        .env("DILATE_FORGE_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, config: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(config: &Value) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), config);
    let out = dir.path().join("out");
    let output = forge(&["run", &cfg, "--out", out.to_str().unwrap()]);
    (dir, output)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn dephasing(stages: &[&str]) -> Value {
    serde_json::json!({
        "system": { "preset": "dephasing", "params": { "gamma": 1.0 } },
        "grid": { "t_end": 1.0, "n_steps": 1000 },
        "pipeline": { "stages": stages, "simulate_from": 0.01 },
        "output": { "formats": ["csv", "json"] }
    })
}

#[test]
fn diagnose_flags_divergent_dephasing() {
    let (dir, output) = run(&dephasing(&["diagnose"]));
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = read_json(&dir.path().join("out/diagnosis.json"));
    assert_eq!(report["diverges_at_zero"], Value::Bool(true));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
}

#[test]
fn empty_stage_list_is_a_validation_error() {
    let (dir, output) = run(&dephasing(&[]));
    assert_eq!(output.status.code(), Some(2));
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn unknown_stage_is_a_validation_error() {
    let (_dir, output) = run(&dephasing(&["dilate", "teleport"]));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn simulation_matches_the_master_equation() {
    let (dir, output) = run(&dephasing(&["compare"]));
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let out = dir.path().join("out");
    let cmp = read_json(&out.join("comparison.json"));
    assert_eq!(cmp["passed"], Value::Bool(true));
    assert!(cmp["max_distance"].as_f64().unwrap() < 1e-6);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(
        manifest["implied_stages"],
        serde_json::json!(["dilate", "simulate"])
    );

    let (header, rows) = read_csv(&out.join("reduced_states.csv"));
    assert_eq!(header.len(), 1 + 2 * 4);
    assert_eq!(rows.len(), 991);
    for row in &rows {
        assert!(
            (row[1] + row[7] - 1.0).abs() < 1e-10,
            "trace of rho at t = {}",
            row[0]
        );
    }
    let table = read_json(&out.join("reduced_states.table.json"));
    let json_rows: Vec<Vec<f64>> = serde_json::from_value(table["rows"].clone()).unwrap();
    assert_eq!(
        json_rows, rows,
        "csv and json tables must carry identical numbers"
    );
}

#[test]
fn hamiltonian_rows_start_where_the_generator_is_finite() {
    let (dir, output) = run(&dephasing(&["dilate"]));
    assert_eq!(output.status.code(), Some(0));
    let out = dir.path().join("out");
    let side = read_json(&out.join("dilation.json"));
    let first = side["first_defined_index"].as_u64().unwrap() as usize;
    assert!(first >= 1);
    assert_eq!(side["divergent_at_start"], Value::Bool(true));
    let (header, h) = read_csv(&out.join("hamiltonian.csv"));
    let (_, u) = read_csv(&out.join("unitary.csv"));
    assert_eq!(header.len(), 1 + 2 * 16);
    assert_eq!(u.len(), 1001);
    assert_eq!(h.len(), 1001 - first);
    assert_eq!(h[0][0], u[first][0]);
}

#[test]
fn tight_tolerance_fails_with_exit_three_and_still_writes_a_manifest() {
    let mut config = dephasing(&["compare"]);
    config["pipeline"]["tolerance"] = serde_json::json!(1e-30);
    let (dir, output) = run(&config);
    assert_eq!(output.status.code(), Some(3));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["exit_code"], 3);
    assert!(manifest["error"].as_str().unwrap().contains("compare"));
}

#[test]
fn simulating_through_the_divergence_is_rejected() {
    let mut config = dephasing(&["simulate"]);
    config["pipeline"]["simulate_from"] = serde_json::json!(0.0);
    let (_dir, output) = run(&config);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn cutoff_allows_simulation_from_zero() {
    let config = serde_json::json!({
        "system": { "preset": "dephasing" },
        "grid": { "t_end": 1.0, "n_steps": 1000 },
        "cutoff": { "c": 40.0 },
        "pipeline": { "stages": ["simulate"] }
    });
    let (dir, output) = run(&config);
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    let warnings = manifest["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains("cutoff")));
}

#[test]
fn numerical_outputs_are_reproducible() {
    let config = dephasing(&["compare", "rescale"]);
    let (a, out_a) = run(&config);
    let (b, out_b) = run(&config);
    assert_eq!(out_a.status.code(), Some(0));
    assert_eq!(out_b.status.code(), Some(0));
    let manifest = read_json(&a.path().join("out/manifest.json"));
    for name in manifest["outputs"].as_array().unwrap() {
        let name = name.as_str().unwrap();
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn overrides_apply_before_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &dephasing(&["diagnose"]));
    let ok = forge(&["validate", &cfg]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = forge(&["validate", &cfg, "--override", "grid.n_steps=0"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn every_preset_validates_with_default_parameters() {
    let output = forge(&["presets"]);
    assert_eq!(output.status.code(), Some(0));
    let catalog: Value = serde_json::from_slice(&output.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for preset in catalog.as_array().unwrap() {
        let name = preset["name"].as_str().unwrap();
        if name == "custom" {
            continue;
        }
        let mut params = serde_json::Map::new();
        for p in preset["parameters"].as_array().unwrap() {
            params.insert(p["name"].as_str().unwrap().into(), p["default"].clone());
        }
        let config = serde_json::json!({
            "system": { "preset": name, "params": params },
            "grid": { "t_end": 1.0, "n_steps": 100 },
            "pipeline": { "stages": ["dilate"] }
        });
        let cfg = write_config(dir.path(), &config);
        let v = forge(&["validate", &cfg]);
        assert_eq!(
            v.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&v.stderr)
        );
    }
}

#[test]
fn bad_thread_count_is_rejected() {
    let output = Command::new(env!("CARGO_BIN_EXE_dilate-forge"))
        .arg("presets")
        .env("DILATE_FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
