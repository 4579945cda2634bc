use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn specgeom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specgeom"))
        .current_dir(dir)
        .env_remove("SPECGEOM_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn lambda_bar1(dir: &Path) -> f64 {
    json(&dir.join("out/eig.json"))["normalized"][1].as_f64().unwrap()
}

#[test]
fn eig_on_the_round_sphere_and_square_torus() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["eig", "--mesh", "icosphere:5", "--measure", "uniform", "--k", "3", "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!((lambda_bar1(d.path()) / (8.0 * PI) - 1.0).abs() < 2e-3);
    let o = specgeom(d.path(), &["eig", "--mesh", "torus:0,1:64", "--measure", "uniform", "--k", "1", "--out-dir", "out"]);
    assert_eq!(code(&o), 0);
    assert!((lambda_bar1(d.path()) / (4.0 * PI * PI) - 1.0).abs() < 2e-3);
    let manifest = json(&d.path().join("out/eig.manifest.json"));
    assert_eq!(manifest["config"]["mesh"], "torus:0,1:64");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_mesh_file_is_an_input_error_naming_the_path() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["eig", "--mesh", "no/such/mesh.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such/mesh.json"));
}

#[test]
fn unknown_experiment_lists_the_registered_set() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["audit", "nonsense"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["lemma21", "hersch", "sharpness", "concentration", "robin", "bubbling", "canonical", "jacobi", "density"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn hersch_audit_of_a_measure_file_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["measure-gen", "--mesh", "icosphere:4", "--measure", "hersch:0", "--out", "perturbed.json"]);
    assert_eq!(code(&o), 0);
    let o = specgeom(d.path(), &["audit", "hersch", "--mesh", "icosphere:4", "--measure", "perturbed.json", "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep = json(&d.path().join("out/hersch.json"));
    let row = &rep["rows"][0];
    assert_eq!(row["pass"], true);
    assert!(row["margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn robin_audit_writes_a_two_row_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["audit", "robin", "--eps", "1e-3,1e-4", "--out-dir", "out"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.path().join("out/robin.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,lhs,rhs,margin,pass");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
}

#[test]
fn restricted_sharpness_slope_is_quadratic() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["audit", "sharpness", "--kind", "prop72_restricted", "--mesh", "icosphere-unit:4", "--coarse-mesh", "icosphere-unit:3", "--out-dir", "out"]);
    assert_eq!(code(&o), 0);
    let slope = json(&d.path().join("out/sharpness.json"))["provenance"]["slope"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&slope), "{slope}");
}

#[test]
fn failing_checks_exit_with_one() {
    // far too coarse for the 3% density-limit tolerance
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["audit", "density", "--level", "8", "--out-dir", "out"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("run.cfg"), "# sphere run\nmesh = icosphere:3\nk = 5\nout-dir = out\n").unwrap();
    let o = specgeom(d.path(), &["eig", "--config", "run.cfg", "--k", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let eig = json(&d.path().join("out/eig.json"));
    assert_eq!(eig["eigenvalues"].as_array().unwrap().len(), 3);
    assert_eq!(eig["mesh"], "icosphere:3");
    std::fs::write(d.path().join("bad.cfg"), "meshh = icosphere:3\n").unwrap();
    assert_eq!(code(&specgeom(d.path(), &["eig", "--config", "bad.cfg"])), 2);
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let args = ["audit", "hersch", "lemma21", "--mesh", "icosphere:4", "--measure", "hersch:3", "--deterministic", "--out-dir", "out"];
    let files = ["hersch.json", "hersch.csv", "hersch.txt", "hersch.manifest.json", "lemma21.json", "lemma21.manifest.json"];
    assert_eq!(code(&specgeom(d.path(), &args)), 0);
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(d.path().join("out").join(f)).unwrap()).collect();
    assert_eq!(code(&specgeom(d.path(), &args)), 0);
    for (f, bytes) in files.iter().zip(first) {
        assert_eq!(std::fs::read(d.path().join("out").join(f)).unwrap(), bytes, "{f} differs");
    }
    let manifest = json(&d.path().join("out/hersch.manifest.json"));
    assert_eq!(manifest["deterministic"], true);
    assert_eq!(manifest["threads"], 1);
}

#[test]
fn plotdata_bundles_reports() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&specgeom(d.path(), &["audit", "robin", "--out-dir", "out"])), 0);
    let o = specgeom(d.path(), &["plotdata", "out/robin.json", "--out-dir", "plots"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.path().join("plots/robin.plot.csv")).unwrap();
    assert!(csv.starts_with("param,lhs,rhs,margin,pass\n"));
    let long = std::fs::read_to_string(d.path().join("plots/provenance.csv")).unwrap();
    assert!(long.starts_with("report,key,value\n") && long.lines().count() > 1);
    assert_eq!(code(&specgeom(d.path(), &["plotdata"])), 2);
    std::fs::write(d.path().join("broken.json"), "{ not a report").unwrap();
    assert_eq!(code(&specgeom(d.path(), &["plotdata", "broken.json"])), 2);
}

#[test]
fn balance_and_mesh_generation() {
    let d = tempfile::tempdir().unwrap();
    let o = specgeom(d.path(), &["balance", "--mesh", "icosphere:3", "--measure", "hersch:4", "--out-dir", "out"]);
    assert_eq!(code(&o), 0);
    let b = json(&d.path().join("out/balance.json"));
    assert!(b["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(code(&specgeom(d.path(), &["mesh-gen", "--mesh", "equilateral:12", "--out", "eq.json"])), 0);
    let o = specgeom(d.path(), &["eig", "--mesh", "eq.json", "--k", "6", "--out-dir", "out"]);
    assert_eq!(code(&o), 0);
    let expect = 8.0 * PI * PI / 3f64.sqrt();
    assert!((lambda_bar1(d.path()) / expect - 1.0).abs() < 0.05);
}

#[test]
fn single_atom_balancing_is_a_numeric_failure() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("atom.json"), format!("{{\"density\": {:?}, \"atoms\": [{{\"vertex\": 0, \"weight\": 1.0}}]}}", vec![0.0; 42])).unwrap();
    let o = specgeom(d.path(), &["balance", "--mesh", "icosphere:1", "--measure", "atom.json"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
