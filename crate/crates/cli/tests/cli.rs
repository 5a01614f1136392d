use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn linstab(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_linstab"));
    cmd.args(args).env_remove("LINSTAB_OUTPUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("LINSTAB_OUTPUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn validate_prints_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"experiment": "ellipticity", "seed": 2}"#);
    let out = linstab(&["validate", "--config", &cfg], None);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["grid"]["N"], 32);
    assert_eq!(v["grid"]["L"], 4.0);
    assert_eq!(v["rays"]["n_angles"], 90);
    assert_eq!(v["rays"]["n_offsets"], 90);
}

#[test]
fn invalid_config_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"experiment": "ellipticity", "grid": {"N": 7}, "weight": {"kind": "foo"}}"#);
    let out = linstab(&["run", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("grid.N must be even ≥ 8"), "{err}");
    assert!(err.contains("seed required for reproducibility"));
    assert!(err.contains("weight.kind") && err.contains("\"foo\""));
}

#[test]
fn seq_counterexample_writes_the_table_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#"{"experiment": "seq-counterexample", "seed": 9, "sobolev": [0, 1, 2]}"#);
    let out = linstab(&["run", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("seq.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,hs_norm_s0,hs_norm_s1,hs_norm_s2,map_residual");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 50);
    for r in rows {
        let residual: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual <= 1e-15);
    }
    let rep = report(&out_dir);
    assert_eq!(rep["seed"], 9);
    assert_eq!(rep["config"]["seed"], 9);
    assert_eq!(rep["config"]["sobolev"], serde_json::json!([0.0, 1.0, 2.0]));
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["manifest"][0]["file"], "seq.csv");
}

#[test]
fn env_dir_is_used_and_echoed_and_seed_flag_fills_in() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from-env");
    let cfg = write_config(tmp.path(), r#"{"experiment": "interp-check", "interp": {"trials": 50}}"#);
    let out = linstab(&["run", "--config", &cfg, "--seed", "17"], Some(&env_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&env_dir);
    assert_eq!(rep["env"]["LINSTAB_OUTPUT_DIR"], env_dir.to_str().unwrap());
    assert_eq!(rep["seed"], 17);
    assert!(rep["results"]["max_ratio"].as_f64().unwrap() <= 1.0 + 1e-12);
}

#[test]
fn failed_contract_and_failed_stage_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // the limited-angle drop cannot reach 10× between two neighbouring resolutions
    let cfg = write_config(
        tmp.path(),
        r#"{"experiment": "stability-sweep", "seed": 1, "output_dir": "OUT",
            "weight": {"kind": "limited_angle", "center": 1.5707963267948966, "half_width": 0.5235987755982988, "taper": 0.1},
            "stability": {"resolutions": [16, 18]}}"#
            .replace("OUT", tmp.path().join("a").to_str().unwrap())
            .as_str(),
    );
    let out = linstab(&["run", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL non-elliptic weight"));

    // λh² > 1 on a 16-point grid
    let cfg = write_config(
        tmp.path(),
        &format!(
            r#"{{"experiment": "coherent-probe", "seed": 1, "output_dir": "{}", "grid": {{"N": 16}},
                "lambdas": [25, 200], "probe": {{"backend": "matrix"}}}}"#,
            tmp.path().join("b").display()
        ),
    );
    let out = linstab(&["run", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stderr).unwrap().contains("stage `probe`"));
}
