use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use replicate_core::fdp::storey_estimate;
use replicate_core::output::csv_string;
use replicate_core::study::{filter_eligible, parse_studies, EligibilityCriteria, SCHEMA_VERSION};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture.csv")
}

fn replicate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_replicate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const HEADER: &str = "study_id,arm,test_family,statistic,df,n_total,n_group1,n_group2,n_covariates,reported_p,sidedness,direction,k_override\n";

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn validate_fixture() {
    let f = fixture();
    let o = replicate(&["validate", "--input", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("metric,value\n"));
    assert!(out.contains("total,50\n"));
    assert!(out.contains("rows_parsed,100\n"));
}

#[test]
fn truncated_file_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}a,original,z,2.5,,100,,,,0.0124,two_sided,,\na,replication,z,1.0,,100\n");
    let p = write(dir.path(), "t.csv", &body);
    let o = replicate(&["validate", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let o = replicate(&["fdp", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.csv", "study_id,arm,bogus\n");
    let o = replicate(&["validate", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn nothing_significant_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{HEADER}a,original,z,1.0,,100,,,,0.317,two_sided,,\na,replication,z,0.5,,100,,,,0.617,two_sided,,\n"
    );
    let p = write(dir.path(), "n.csv", &body);
    assert_eq!(replicate(&["validate", "--input", p.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(replicate(&["decline", "--input", p.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn external_alpha_too_large_is_usage_error() {
    let f = fixture();
    let o = replicate(&["fdp", "--input", f.to_str().unwrap(), "--method", "external", "--alpha", "0.03"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"));
}

#[test]
fn missing_input_is_usage_error() {
    assert_eq!(replicate(&["fdp"]).status.code(), Some(2));
}

#[test]
fn fdp_matches_library() {
    let f = fixture();
    let o = replicate(&["fdp", "--input", f.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stderr.is_empty());

    let parsed = parse_studies(&f, SCHEMA_VERSION).unwrap();
    let sets = filter_eligible(&parsed, &EligibilityCriteria::default());
    let p: Vec<f64> = sets.fdp.iter().map(|s| s.p_original / 0.05).collect();
    let mut res = storey_estimate(&p, 0.5, 0.95).unwrap();
    res.alpha0 = 0.05;
    res.alpha = 0.05;
    let mut header = vec!["source"];
    header.extend(replicate_core::fdp::FdpResult::CSV_HEADER);
    let mut row = vec!["original".to_string()];
    row.extend(res.csv_row());
    assert_eq!(stdout(&o), csv_string(&header, [row]));
}

#[test]
fn decline_grid_rows() {
    let f = fixture();
    let o = replicate(&["decline", "--input", f.to_str().unwrap(), "--rho-grid", "0:1:0.05", "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 22);
}

#[test]
fn shift_table_and_json() {
    let f = fixture();
    let o = replicate(&["shift", "--input", f.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().ends_with("bh:0.10,holm:0.05"));
    let o = replicate(&["shift", "--input", f.to_str().unwrap(), "--format", "json", "--unadjusted", "--quiet"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.as_array().unwrap().iter().all(|r| r["ci"]["adjusted"] == false));
}

#[test]
fn simulate_is_byte_reproducible_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = replicate(&[
            "simulate", "--trials", "200", "--theta-grid", "0:2:0.5", "--seed", "4", "--quiet", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 1 + 4 * 5);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 4);
}

#[test]
fn manifest_carries_input_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fdp.json");
    let f = fixture();
    let o = replicate(&["fdp", "--input", f.to_str().unwrap(), "--format", "json", "--quiet", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fdp.json.manifest.json")).unwrap()).unwrap();
    let digest = replicate_cli::manifest::sha256_hex(&std::fs::read(&f).unwrap());
    assert_eq!(m["input_digest"], digest.as_str());
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows[0]["source"], "original");
    assert!(rows[0]["R"].as_u64().unwrap() > 0);
}

#[test]
fn config_file_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "# decline settings\nrho_grid = 0:1:0.5\nlambda = 0.4\n");
    let f = fixture();
    let base = ["decline", "--input", f.to_str().unwrap(), "--quiet", "--config", cfg.to_str().unwrap()];
    let o = replicate(&base);
    assert_eq!(stdout(&o).lines().count(), 4);
    let mut args = base.to_vec();
    args.extend(["--rho-grid", "0:1:0.25"]);
    assert_eq!(stdout(&replicate(&args)).lines().count(), 6);
}
