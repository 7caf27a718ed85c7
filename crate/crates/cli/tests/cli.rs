use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgolab::forward::read_dtn;

const SMALL: &str = r#"
seed = 3
frequencies = [0.5, 2.0]
h_ladder = [0.4, 0.2]
lambda_ladder = [0.6, 0.45, 0.3]
xi_max = 6.5

[domain]
lower = [-0.5, -0.5, -0.5]
upper = [0.5, 0.5, 0.5]
dims = [11, 11, 11]

[fluid]
kind = "gaussian-bump"
center = [0.0, 0.0, 0.0]
width = 0.15
background = { c = 1.0, rho = 1.0, v = [0.1, 0.0, 0.0], alpha0 = 0.02, zeta = 1.5 }
delta = { c = 0.1, rho = 0.2, v = [0.0, 0.05, 0.0], alpha0 = 0.01 }

[pair.gauge]
radius = 0.3
"#;

fn cgolab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgolab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CGOLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file in `dir` except the manifest is listed in it exactly once.
fn assert_complete(dir: &Path) {
    let m = manifest(dir);
    let mut listed: Vec<String> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().into()).collect();
    let mut present: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
}

#[test]
fn verify_on_the_default_scenario_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = cgolab(&["verify", "--out", "a"], tmp.path());
    let b = cgolab(&["verify", "--out", "b", "--threads", "1"], tmp.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success(), "{}", stderr(&b));
    let stdout = String::from_utf8_lossy(&a.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("pass")).count() >= 10);
    assert!(!stdout.contains("FAIL"));
    for name in ["manifest.json", "verify.csv"] {
        let x = fs::read(tmp.path().join("a/verify").join(name)).unwrap();
        let y = fs::read(tmp.path().join("b/verify").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    assert_complete(&tmp.path().join("a/verify"));
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cgolab(&["verify", "--out", "o", "--seed", "11"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&tmp.path().join("o/verify"))["seed"], 11);
}

#[test]
fn dtn_of_a_gauge_pair_writes_two_close_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), SMALL);
    let o = cgolab(&["dtn", "--scenario", s.to_str().unwrap(), "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("out/dtn");
    assert_complete(&dir);
    let l1 = read_dtn(dir.join("dtn_1.cgof")).unwrap();
    let l2 = read_dtn(dir.join("dtn_2.cgof")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("distance.json")).unwrap()).unwrap();
    let reported = report["relative_distance"].as_f64().unwrap();
    // Recomputed from the written matrices.
    let num: f64 = l1.matrix().iter().zip(l2.matrix()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = l2.matrix().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    assert!((reported - num / den).abs() <= 1e-12 * reported.max(1e-300), "{reported} vs {}", num / den);
    assert!(reported < 5e-2, "{reported}");
    assert_eq!(report["gauge_pair"], true);
}

#[test]
fn increasing_h_ladder_is_rejected_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("h_ladder = [0.4, 0.2]", "h_ladder = [0.2, 0.4]");
    let s = scenario(tmp.path(), &text);
    let o = cgolab(&["cgo-diagnose", "--scenario", s.to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("h_ladder") && err.contains("scenario.toml:4:"), "{err}");
    assert!(!tmp.path().join("out/cgo-diagnose").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), &format!("{SMALL}\nextra = 1\n"));
    let o = cgolab(&["forward", "--scenario", s.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extra"), "{}", stderr(&o));
    let s = scenario(tmp.path(), &SMALL.replace("radius = 0.3", "radius = 0.3\nwidth = 1"));
    assert_eq!(cgolab(&["forward", "--scenario", s.to_str().unwrap()], tmp.path()).status.code(), Some(1));
}

#[test]
fn missing_field_files_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let fluid = "[fluid]\nkind = \"files\"\nc = \"c.cgof\"\nrho = \"rho.cgof\"\nv = \"v.cgof\"\nalpha0 = \"a.cgof\"\nzeta = \"z.cgof\"\n";
    let start = SMALL.find("[fluid]").unwrap();
    let end = SMALL.find("[pair.gauge]").unwrap();
    let text = format!("{}{fluid}\n{}", &SMALL[..start], &SMALL[end..]);
    let s = scenario(tmp.path(), &text);
    let o = cgolab(&["forward", "--scenario", s.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"), "{}", stderr(&o));
}

#[test]
fn reconstruct_refuses_dtn_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), &format!("mode = \"dtn\"\n{SMALL}"));
    let o = cgolab(&["reconstruct", "--scenario", s.to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!tmp.path().join("out/reconstruct").exists());
    assert!(!tmp.path().join("out/.reconstruct.partial").exists());
}

#[test]
fn numerical_failure_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), &SMALL.replace("frequencies = [0.5, 2.0]", "frequencies = [1.0, 1.0000000001]"));
    let o = cgolab(&["fluids", "--scenario", s.to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let left: Vec<_> = fs::read_dir(tmp.path().join("out")).unwrap().collect();
    assert!(left.is_empty());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), b"").unwrap();
    let o = cgolab(&["verify", "--out", "blocker/sub"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_thread_setting_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cgolab"))
        .args(["verify", "--out", "o"])
        .current_dir(tmp.path())
        .env("CGOLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn remaining_commands_run_on_a_small_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), SMALL);
    for cmd in ["forward", "cgo-diagnose", "boundary", "fluids"] {
        let o = cgolab(&[cmd, "--scenario", s.to_str().unwrap(), "--out", "out"], tmp.path());
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert_complete(&tmp.path().join("out").join(cmd));
    }
    let csv = fs::read_to_string(tmp.path().join("out/cgo-diagnose/cgo.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "h,tau,transport_residual,pde_residual,r_h1scl");
    assert_eq!(csv.lines().count(), 3);
    let m = manifest(&tmp.path().join("out/fluids"));
    let closure = m["residuals"]["gauge_closure"].as_f64().unwrap();
    assert!(closure < 1e-3, "{closure}");
    let c_err = m["residuals"]["first_gauge-robust_c"].as_f64().unwrap();
    assert!(c_err < 1e-8, "{c_err}");
}

#[test]
fn gauge_touching_the_boundary_layer_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), &SMALL.replace("radius = 0.3", "radius = 0.45"));
    let o = cgolab(&["dtn", "--scenario", s.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pair.gauge") && stderr(&o).contains("scenario.toml:20:"), "{}", stderr(&o));
}

#[test]
fn reconstruct_of_a_gauge_pair_sees_no_curl() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), &SMALL.replace("xi_max = 6.5", "xi_max = 3.5"));
    let o = cgolab(&["reconstruct", "--scenario", s.to_str().unwrap(), "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("out/reconstruct");
    assert_complete(&dir);
    let err = manifest(&dir)["residuals"]["curl_relative_error"].as_f64().unwrap();
    assert!(err < 5e-2, "{err}");
    let gauge: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("gauge.json")).unwrap()).unwrap();
    assert!(gauge["equivalent"].is_boolean());
}
