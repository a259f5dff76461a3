use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circlepack"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn pipeline_from_generation_to_uniformization() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-hex", "--n", "6", "--field", "default", "--amplitude", "0.05", "--out", "mesh.json"], d);
    let mesh: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("mesh.json")).unwrap()).unwrap();
    assert_eq!(mesh["version"], 1);
    assert_eq!(mesh["num_vertices"], 36);
    assert_eq!(mesh["triangles"].as_array().unwrap().len(), 72);
    assert!(mesh["lengths"].as_array().unwrap().iter().all(|e| e["edge"][0].as_u64() < e["edge"][1].as_u64()));

    ok(&["fit-packing", "--mesh", "mesh.json", "--eps", "0.1", "--out", "packed.json"], d);
    let report = ok(&["check", "--mesh", "packed.json"], d);
    assert!(report.contains("\"euler_characteristic\": 0"));
    assert!(report.contains("spectrum (packing weights)"));
    assert!(report.contains("isoperimetric constant: skipped"));

    for method in ["newton", "flow"] {
        let out = format!("{method}.json");
        ok(&["uniformize", "--mesh", "packed.json", "--tol", "1e-10", "--method", method, "--out", &out], d);
        let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(&out)).unwrap()).unwrap();
        assert_eq!(result["u"].as_array().unwrap().len(), 36);
        let k_max =
            result["curvature"].as_array().unwrap().iter().map(|k| k.as_f64().unwrap().abs()).fold(0.0, f64::max);
        assert!(k_max <= 1e-10);
        assert!(result["area_shift"].is_number());
        assert!(result["iteration_log"].is_array());
    }
}

#[test]
fn fit_packing_prints_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-hex", "--n", "4", "--out", "m.json"], dir.path());
    let json = ok(&["fit-packing", "--mesh", "m.json", "--eps", "0.2"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["rho"].as_array().unwrap().len(), 16);
    assert!(v["cos_theta"].as_array().unwrap().iter().all(|c| (c["value"].as_f64().unwrap() - 1.0).abs() < 1e-12));
}

#[test]
fn convergence_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "convergence",
            "--field",
            "default",
            "--amplitude",
            "0.05",
            "--sizes",
            "8,16",
            "--eps",
            "0.1",
            "--method",
            "newton",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,l_max,err_max,err_l2,iterations,runtime_ms");
    assert!(lines[1].starts_with("8,") && lines[2].starts_with("16,"));
    assert!(lines.last().unwrap().starts_with("# fitted_order="));
}

#[test]
fn small_mesh_check_reports_isoperimetric_constant() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-hex", "--n", "3", "--out", "m.json"], dir.path());
    let report = ok(&["check", "--mesh", "m.json"], dir.path());
    assert!(report.contains("isoperimetric constant: 0."));
    assert!(report.contains("\"kernel_dimension\":1"));
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-hex", "--n", "4", "--out", "m.json"], d);
    let out = run(&["uniformize", "--mesh", "m.json", "--out", "r.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit-packing"));

    std::fs::write(d.join("bad.json"), r#"{"version":1,"num_vertices":3,"triangles":[[0,1,2]]}"#).unwrap();
    let out = run(&["check", "--mesh", "bad.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("NonManifoldEdge"));

    let out = run(&["convergence", "--sizes", "16,8"], d);
    assert!(!out.status.success());
}
