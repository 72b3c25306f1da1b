use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(name: &str) -> String {
    root().join("data").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoequiv")).args(args).output().unwrap()
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let text = std::fs::read_to_string(root().join("schema/report.schema.json")).unwrap();
        jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
    })
}

/// Parse a report and check it against the shipped schema.
fn report(text: &[u8]) -> Value {
    let v: Value = serde_json::from_slice(text).unwrap();
    let errors: Vec<String> = validator().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    v
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SCHW_GRID: &str = "0.2:0.8:5,3.5:4.5:5,1:2:5,0.2:0.8:5";

#[test]
fn generate_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let o = run(&[
        "generate",
        "--metric",
        &data("flat2.json"),
        "--targets",
        "0.5,0.5;0.25,0.75",
        "--n-curves",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&std::fs::read(out.join("report.json")).unwrap());
    assert_eq!(r["result"]["curves"], 24);
    let family = std::fs::read_to_string(out.join("family.jsonl")).unwrap();
    assert_eq!(family.lines().count(), 25);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["curves"], 24);
    assert_eq!(manifest["outputs"]["family.jsonl"].as_str().unwrap().len(), 64);
    assert!(std::fs::read_to_string(out.join("timing.json")).unwrap().contains("seconds"));
    assert!(!std::fs::read_to_string(out.join("report.json")).unwrap().contains("seconds"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "generate",
            "--metric",
            &data("schwarzschild.json"),
            "--targets",
            "0.5,4,1.5,0.5;0.4,3.8,1.2,0.6",
            "--jets",
            "fit",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (go("a"), go("b"));
    for f in ["family.jsonl", "curves.jsonl", "manifest.json", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn generate_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let o = run(&[
        "generate",
        "--metric",
        &data("schwarzschild.json"),
        "--grid",
        SCHW_GRID,
        "--seed",
        "3",
        "--out",
        gen.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let rc = dir.path().join("rc");
    let family = gen.join("family.jsonl");
    let o = run(&["reconstruct", "--family", family.to_str().unwrap(), "--grid", SCHW_GRID, "--out", rc.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&std::fs::read(rc.join("report.json")).unwrap());
    assert_eq!(r["result"]["verdict"], "geodesible");
    assert!(rc.join("connection.json").exists());
    // rerun: byte-identical report
    let o = run(&["reconstruct", "--family", family.to_str().unwrap(), "--grid", SCHW_GRID]);
    assert_eq!(o.stdout, std::fs::read(rc.join("report.json")).unwrap());
}

#[test]
fn reconstruct_needs_a_grid() {
    let o = run(&["reconstruct", "--family", &data("flat2.json")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_metric_file() {
    let o = run(&["generate", "--metric", "no/such/metric.json", "--out", "unused"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such/metric.json"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&run(&["verify", "--frobnicate"])), 2);
}

#[test]
fn flrw_pair_is_equivalent() {
    let o = run(&["verify", "--metric", &data("flrw.json"), "--partner", &data("flrw_partner.json")]);
    assert_eq!(code(&o), 0);
    let r = report(&o.stdout);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["result"]["equivalence"]["equivalent"], true);
    assert_eq!(r["result"]["affinely_equivalent"], false);
    // idempotent
    assert_eq!(o.stdout, run(&["verify", "--metric", &data("flrw.json"), "--partner", &data("flrw_partner.json")]).stdout);
}

#[test]
fn aminova_pair_is_not_equivalent() {
    let o = run(&["verify", "--metric", &data("aminova.json"), "--partner", &data("aminova_partner.json")]);
    assert_eq!(code(&o), 1);
    let r = report(&o.stdout);
    assert_eq!(r["status"], "negative");
    assert_eq!(r["result"]["equivalence"]["equivalent"], false);
    assert!(r["result"]["equivalence"]["residual"].as_f64().unwrap() >= 1e-3);
}

#[test]
fn flat_connection_fails_at_conformal_stage() {
    let o = run(&["recover", "--connection", &data("flat_connection.json")]);
    assert_eq!(code(&o), 1);
    let r = report(&o.stdout);
    assert_eq!(r["result"]["stage"], "conformal");
    assert!(r["result"]["failure"].is_string());
}

#[test]
fn schwarzschild_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rec");
    let o = run(&["recover", "--metric", &data("schwarzschild.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&std::fs::read(out.join("report.json")).unwrap());
    assert_eq!(r["result"]["stage"], "verified");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metric.json")).unwrap()).unwrap();
    assert_eq!(m["dim"], 4);
    assert_eq!(m["components"]["g_00"]["samples"].as_array().unwrap().len(), 625);
}

#[test]
fn rigidity_report() {
    let o = run(&["rigidity", "--metric", &data("schwarzschild.json")]);
    assert_eq!(code(&o), 0);
    let r = report(&o.stdout);
    assert_eq!(r["result"]["points"].as_array().unwrap().len(), 625);
}

#[test]
fn glue_catalog_recipes() {
    let dir = tempfile::tempdir().unwrap();
    let blocks = root().join("data/blocks");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&blocks).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for (k, path) in names.iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let o = run(&["glue", "--blocks", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        let r = report(&std::fs::read(out.join("report.json")).unwrap());
        assert_eq!(r["result"]["dim"], 4);
        assert_eq!(r["result"]["signature"], "lorentz");
        // the written pair verifies on its own
        let o = run(&[
            "verify",
            "--metric",
            out.join("g.json").to_str().unwrap(),
            "--partner",
            out.join("gbar.json").to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", path.display());
    }
}

#[test]
fn overlapping_blocks_cannot_be_glued() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("bad.json");
    std::fs::write(
        &recipe,
        r#"[{"kind": "one_dim", "params": {"x": "x0 + 1", "sign": 1}, "domain": [[0.5, 1.5]]},
            {"kind": "one_dim", "params": {"x": "x0 + 1.5", "sign": -1}, "domain": [[0.5, 1.5]]}]"#,
    )
    .unwrap();
    let o = run(&["glue", "--blocks", recipe.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("overlap"));
}

#[test]
fn schema_rejects_malformed_reports() {
    let o = run(&["verify", "--metric", &data("dini.json"), "--partner", &data("dini_partner.json")]);
    let mut v = report(&o.stdout);
    v["status"] = "maybe".into();
    assert!(!validator().is_valid(&v));
    let mut v = report(&o.stdout);
    v["result"]["equivalence"]["residual"] = "small".into();
    assert!(!validator().is_valid(&v));
    let mut v = report(&o.stdout);
    v["result"]["seconds"] = 1.0.into();
    assert!(!validator().is_valid(&v));
}
