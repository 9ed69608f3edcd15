use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn nlms(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlms"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("the nlms binary runs")
}

fn preset(name: &str) -> String {
    presets().join(name).to_string_lossy().into_owned()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn flat_membranes_exit_zero_with_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlms(&["run", &preset("membranes_flat")], dir.path());
    assert_eq!(o.status.code(), Some(0));
    for name in ["u.grid", "v.grid"] {
        let g = nlms::domain::io::read_graph(&dir.path().join(name)).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
    }
    let m = manifest(dir.path());
    assert_eq!(m["exit_code"], 0);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for f in &files {
        assert!(dir.path().join(f).is_file(), "{f} declared but missing");
    }
    let on_disk = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(on_disk, files.len(), "stray files in the output directory");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn misordered_exteriors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlms(&["run", &preset("membranes_misordered")], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ordering violation"));
    assert!(manifest(dir.path())["errors"][0].as_str().unwrap().contains("ordering violation"));
}

#[test]
fn bad_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlms(&["run", "/nonexistent/config"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "problem = \"two_membranes\"\ns = 0.25\nbogus = 1\n[grid]\ndim = 1\nradius = 1.0\nlevel = 4\n").unwrap();
    let o = nlms(&["run", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn json_config_is_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(presets().join("oracle_graph_8.toml")).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    let json = dir.path().join("graph.json");
    std::fs::write(&json, serde_json::to_string(&value).unwrap()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(nlms(&["run", &preset("oracle_graph_8")], &a).status.code(), Some(0));
    assert_eq!(nlms(&["run", json.to_str().unwrap()], &b).status.code(), Some(0));
    for f in ["u.grid", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn oracle_compare_verdicts_and_refusal() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["oracle_set_4x4", "oracle_graph_8"] {
        let out = dir.path().join(name);
        let o = nlms(&["oracle-compare", &preset(name)], &out);
        assert_eq!(o.status.code(), Some(0), "{name}");
        let csv = std::fs::read_to_string(out.join("oracle_compare.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")), "{csv}");
    }
    let o = nlms(&["oracle-compare", &preset("oracle_oversized")], &dir.path().join("big"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("oracle refused"));
}

#[test]
fn sweep_rows_and_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlms(&["sweep", &preset("linearization_s025"), "--param", "h", "--values", "0.0078125,0.00390625"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(csv.as_bytes());
    let header = rows.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "modulus_c_hat").unwrap();
    let values: Vec<f64> = rows.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(values.len(), 2);
    assert!((values[0] / values[1] - 1.0).abs() < 0.2);
    let o = nlms(&["sweep", &preset("linearization_s025"), "--param", "h", "--values"], &dir.path().join("e"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_marks_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlms(&["sweep", &preset("oracle_graph_8"), "--param", "s", "--values", "0.25,0.8"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[1].contains(",ok,"));
    assert!(lines[2].contains(",failed,"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(nlms(&["run", &preset("audit_s025")], out).status.code(), Some(0));
    }
    for f in ["audit.csv", "u.grid", "v.grid", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
