use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dimineq"))
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

#[test]
fn gaussian_equalities_pass_with_tiny_slack() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = manifest("scenarios/gaussian_equalities.json");
    let out = run(&["verify", scenario.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("report.csv"));
    assert_eq!(rows.len(), 33);
    for row in &rows {
        let slack: f64 = row[5].parse().unwrap();
        assert!(slack.abs() < 1e-8, "{row:?}");
        assert_eq!(&row[6], "pass");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], serde_json::Value::Bool(true));
    assert_eq!(json["rows"].as_array().unwrap().len(), 33);
    assert!(json["rows"][0]["wall_time"].is_number());
}

#[test]
fn missing_potential_id_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = manifest("tests/fixtures/missing_potential_id.json");
    let out = run(&["verify", scenario.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("id") && err.contains("line"), "{err}");
}

#[test]
fn unreadable_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"potential\": \n}").unwrap();
    let out = run(&["verify", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn zero_tolerance_on_grid_fails_with_listing() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = manifest("tests/fixtures/grid_zero_tolerance.json");
    let out = run(&["verify", scenario.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("FAIL grid_zero_tolerance/bl.harge"), "{err}");
    // the default tolerance policy accepts the same evaluation
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&scenario).unwrap()).unwrap();
    value["inequalities"][0].as_object_mut().unwrap().remove("tolerance");
    let relaxed_path = dir.path().join("relaxed.json");
    std::fs::write(&relaxed_path, value.to_string()).unwrap();
    let relaxed = run(&["verify", relaxed_path.to_str().unwrap()], dir.path());
    assert_eq!(relaxed.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("report.csv"));
    let tol: f64 = rows[0][7].parse().unwrap();
    assert!(tol >= 1e-6);
}

#[test]
fn stochastic_jobs_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = manifest("tests/fixtures/langevin_unseeded.json");
    let out = run(&["verify", scenario.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let seeded = run(
        &["verify", scenario.to_str().unwrap(), "--seed", "5", "--jobs", "2"],
        dir.path(),
    );
    assert_eq!(seeded.status.code(), Some(0));
    let first = std::fs::read_to_string(dir.path().join("cloud.csv")).unwrap();
    assert!(first.starts_with("t,H,I,W2,second_moment,Ent_dx\n"));
    assert_eq!(first.lines().count(), 4);
    let again = run(&["verify", scenario.to_str().unwrap(), "--seed", "5"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(first, std::fs::read_to_string(dir.path().join("cloud.csv")).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = manifest("scenarios/ou_audits.json");
    assert_eq!(run(&["verify", scenario.to_str().unwrap()], a.path()).status.code(), Some(0));
    assert_eq!(
        run(&["verify", scenario.to_str().unwrap(), "--jobs", "1"], b.path()).status.code(),
        Some(0)
    );
    let ra = std::fs::read(a.path().join("report.csv")).unwrap();
    let rb = std::fs::read(b.path().join("report.csv")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn translation_sweep_is_an_equality_family() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = manifest("scenarios/translation_sweep.json");
    let out = run(&["sweep", sweep.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("translation_sweep.csv"));
    assert_eq!(rows.len(), 31);
    for (k, row) in rows.iter().enumerate() {
        let a: f64 = row[0].parse().unwrap();
        assert!((a - 0.1 * k as f64).abs() < 1e-12);
        let slack: f64 = row[6].parse().unwrap();
        assert!(slack.abs() < 1e-8);
    }
}

#[test]
fn fundamental_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = manifest("scenarios/fundamental_sweep.json");
    let out = run(&["sweep", sweep.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("fundamental_sweep.csv"));
    let h: Vec<f64> = rows
        .iter()
        .filter(|r| &r[2] == "fundamental_entropy.log_bound")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(h.len(), 40);
    assert!(h.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn empty_range_gives_no_rows_and_cap_refuses() {
    let dir = tempfile::tempdir().unwrap();
    let mut sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest("scenarios/translation_sweep.json")).unwrap())
            .unwrap();
    sweep["parameters"][0]["stop"] = serde_json::json!(-1.0);
    let path = dir.path().join("empty.json");
    std::fs::write(&path, sweep.to_string()).unwrap();
    let out = run(&["sweep", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("translation_sweep.csv")).len(), 0);

    sweep["parameters"][0]["stop"] = serde_json::json!(3.0);
    sweep["cap"] = serde_json::json!(10);
    std::fs::write(&path, sweep.to_string()).unwrap();
    let out = run(&["sweep", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("31 points"));
}

#[test]
fn oracle_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["oracle"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("report.json").exists());
}
