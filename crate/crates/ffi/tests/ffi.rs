use std::ffi::CString;
use std::ptr;

use nlms_ffi::*;

fn graph(dim: usize, radius: f64, h: f64, ext: f64, f: impl Fn(f64) -> f64) -> *mut NlmsGraph {
    let m = (2.0 * radius / h).round() as usize;
    let values: Vec<f64> = (0..m).map(|i| f(-radius + (i as f64 + 0.5) * h)).collect();
    let mut g = ptr::null_mut();
    let status = unsafe { nlms_graph_new(dim, radius, h, values.as_ptr(), values.len(), ext, &mut g) };
    assert_eq!(status, NlmsStatus::Ok);
    g
}

fn last_error() -> String {
    let mut needed = 0;
    unsafe {
        assert_eq!(nlms_last_error(ptr::null_mut(), 0, &mut needed), NlmsStatus::BufferTooSmall);
        let mut buf = vec![0u8; needed];
        assert_eq!(nlms_last_error(buf.as_mut_ptr().cast(), buf.len(), &mut needed), NlmsStatus::Ok);
        String::from_utf8(buf[..needed - 1].to_vec()).unwrap()
    }
}

#[test]
fn obstacle_solve_round_trip() {
    let phi = graph(1, 0.5, 0.125, 0.0, |x| 0.3 - 2.0 * x * x);
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(nlms_solve_obstacle(phi, ptr::null(), 0.25, false, 0, 1e-12, &mut report), NlmsStatus::Ok);
        let (mut conv, mut iters, mut energy) = (false, 0usize, 0.0);
        assert_eq!(nlms_report_summary(report, &mut conv, &mut iters, &mut energy), NlmsStatus::Ok);
        assert!(conv && energy.is_finite());
        let mut u = ptr::null_mut();
        assert_eq!(nlms_report_graph(report, 0, &mut u), NlmsStatus::Ok);
        let mut len = 0;
        assert_eq!(nlms_graph_len(u, &mut len), NlmsStatus::Ok);
        assert_eq!(len, 8);
        let mut values = vec![0.0; len];
        let mut obstacle = vec![0.0; len];
        assert_eq!(nlms_graph_values(u, values.as_mut_ptr(), len), NlmsStatus::Ok);
        assert_eq!(nlms_graph_values(phi, obstacle.as_mut_ptr(), len), NlmsStatus::Ok);
        assert!(values.iter().zip(&obstacle).all(|(a, b)| a >= b));
        let mut contact = 0;
        assert_eq!(nlms_report_contact_count(report, &mut contact), NlmsStatus::Ok);
        assert!(contact > 0);
        assert_eq!(nlms_report_graph(report, 1, &mut u), NlmsStatus::InvalidInput);
        assert_eq!(nlms_graph_values(phi, obstacle.as_mut_ptr(), 3), NlmsStatus::BufferTooSmall);
        nlms_graph_free(u);
        nlms_report_free(report);
        nlms_graph_free(phi);
    }
}

#[test]
fn flat_graph_has_zero_curvature() {
    let g = graph(1, 1.0, 1.0 / 16.0, 0.2, |_| 0.2);
    let mut k = vec![1.0; 32];
    unsafe {
        assert_eq!(nlms_graph_curvature(g, 0.25, k.as_mut_ptr(), k.len()), NlmsStatus::Ok);
        nlms_graph_free(g);
    }
    assert!(k.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut g = ptr::null_mut();
        let values = [0.0; 3];
        assert_eq!(nlms_graph_new(1, 1.0, 0.5, values.as_ptr(), 3, 0.0, &mut g), NlmsStatus::InvalidInput);
        assert!(g.is_null());
        assert!(last_error().contains("invalid input"));
        assert_eq!(nlms_graph_len(ptr::null(), ptr::null_mut()), NlmsStatus::NullPointer);
        let f = graph(1, 0.5, 0.125, 0.0, |_| 0.0);
        let above = graph(1, 0.5, 0.125, 0.5, |_| 0.0);
        let mut report = ptr::null_mut();
        assert_eq!(nlms_solve_two_membranes(f, above, 0.25, false, 0, 0.0, &mut report), NlmsStatus::Ordering);
        assert!(last_error().contains("ordering"));
        assert_eq!(nlms_solve_obstacle(f, ptr::null(), 0.7, false, 0, 0.0, &mut report), NlmsStatus::InvalidInput);
        nlms_graph_free(f);
        nlms_graph_free(above);
        let missing = CString::new("/nonexistent/config.toml").unwrap();
        assert_eq!(nlms_run_config(missing.as_ptr(), ptr::null()), NlmsStatus::Config);
    }
}

#[test]
fn run_config_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("flat.toml");
    std::fs::write(&config, "problem = \"two_membranes\"\ns = 0.25\n\n[grid]\ndim = 1\nradius = 1.0\nlevel = 4\n").unwrap();
    let out = dir.path().join("out");
    let c = CString::new(config.to_str().unwrap()).unwrap();
    let o = CString::new(out.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { nlms_run_config(c.as_ptr(), o.as_ptr()) }, NlmsStatus::Ok);
    assert!(out.join("report.json").is_file());
    assert!(out.join("u.grid").is_file());
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nlms.h")).unwrap();
    for name in [
        "nlms_last_error",
        "nlms_graph_new",
        "nlms_graph_free",
        "nlms_graph_len",
        "nlms_graph_values",
        "nlms_graph_curvature",
        "nlms_solve_obstacle",
        "nlms_solve_two_membranes",
        "nlms_report_free",
        "nlms_report_summary",
        "nlms_report_graph",
        "nlms_report_contact_count",
        "nlms_run_config",
        "typedef struct NlmsGraph NlmsGraph",
        "NLMS_STATUS_PANIC = 10",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|d| d.parent()).unwrap().join("libnlms_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let root = env!("CARGO_MANIFEST_DIR");
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(format!("{root}/include"))
        .arg(format!("{root}/tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("rejected input: invalid input"));
}
