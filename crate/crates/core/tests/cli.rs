use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ruelle(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env("RUELLE_THREADS", "1")
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn toy_degenerate_case_exits_zero() {
    let dir = scratch("toy");
    let o = ruelle(&["toy", "--w0", "0.5", "--w1", "0.5", "--r", "1"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.join("membership.json"));
    assert_eq!(m["memberships"]["w0"], "member");
    assert!(m["eigencheck_residuals"]["u"].as_f64().unwrap() <= 1e-12);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["command"], "toy");
    assert_eq!(manifest["config"]["w0"], "0.5");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn toy_membership_follows_the_lemma() {
    let dir = scratch("toy_lemma");
    let o = ruelle(&["toy", "--w0", "0.9", "--w1", "0.2", "--r", "1", "--section-n", "60"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let m = json(&dir.join("membership.json"));
    // e^-1 = 0.368: 0.9 above it, 0.2 below it
    assert_eq!(m["memberships"]["w0"], "member");
    assert_eq!(m["memberships"]["w1"], "member");
    assert!(m["section_eigs"]["w0_found"].as_bool().unwrap());
}

#[test]
fn suspension_reports_eleven_eigenvalues() {
    let dir = scratch("suspension");
    let o = ruelle(&["suspension", "--k-max", "5", "--nu-max", "20", "--R", "8"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let spec = json(&dir.join("spectrum.json"));
    let pts = spec.as_array().unwrap();
    assert_eq!(pts.len(), 11);
    for (pt, k) in pts.iter().zip(-5..=5) {
        assert!(pt["re"].as_f64().unwrap().abs() < 1e-10);
        assert!((pt["im"].as_f64().unwrap() - std::f64::consts::TAU * k as f64).abs() < 1e-10);
    }
    let certs = fs::read_to_string(dir.join("certificates.csv")).unwrap();
    assert!(certs.starts_with("nu1,nu2,norm_bound,pass\n"));
    assert!(certs.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn outputs_are_byte_identical() {
    let (a, b) = (scratch("det_a"), scratch("det_b"));
    for d in [&a, &b] {
        let o = ruelle(&["escape-sweep", "--field-size", "9", "--seed", "7"], d);
        assert_eq!(o.status.code(), Some(0));
        let o = ruelle(&["toy", "--w0", "0.3", "--w1", "0.7", "--r", "0.5", "--format", "json"], &d.join("toy"));
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["orders.csv", "decay.csv", "weight_field.csv", "toy/membership.json"] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name}");
        assert!(!x.contains(&b'\r'));
    }
    // the manifests differ only by output_dir
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(ma["config"]["seed"], "7");
    assert_eq!(ma["config"]["field_size"], mb["config"]["field_size"]);
}

#[test]
fn config_file_then_flags() {
    let dir = scratch("config_file");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "# suspension run\nk-max = 2\nnu_max = 6\n").unwrap();
    let o = ruelle(&["suspension", "--config", cfg.to_str().unwrap(), "--k-max", "3", "--wf-k", "0"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.join("spectrum.json")).as_array().unwrap().len(), 7);
    assert_eq!(json(&dir.join("manifest.json"))["config"]["nu_max"], "6");
}

#[test]
fn bad_configs_exit_two() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "k_max = 2\nbogus = 1\n").unwrap();
    assert_eq!(ruelle(&["suspension", "--config", cfg.to_str().unwrap()], &dir).status.code(), Some(2));
    assert_eq!(ruelle(&["toy", "--bogus", "1"], &dir).status.code(), Some(2));
    assert_eq!(ruelle(&["toy", "--r", "abc"], &dir).status.code(), Some(2));
    assert_eq!(ruelle(&["escape-sweep", "--gamma", "1.5"], &dir).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args(["toy", "--output-dir", dir.to_str().unwrap()])
        .env("RUELLE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unresolved_grid_exits_three() {
    let dir = scratch("resolution");
    // 16 points cannot hold packets at |eta| = 24
    let o = ruelle(&["resolution-check", "--dim", "1", "--grid", "16", "--base", "8", "--eta-max", "24"], &dir);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_checks_exit_one() {
    let dir = scratch("weyl_fail");
    // a sweep that stops far short of the kink cannot find alpha*
    let o = ruelle(&["weyl-boxes", "--alpha-grid", "0.5:0.55:0.025", "--omega-max", "4096"], &dir);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.join("summary.json").exists());
    let o = ruelle(&["weyl-boxes", "--omega-max", "1024"], &dir);
    assert_eq!(o.status.code(), Some(2), "too few omegas for a fit");
}

#[test]
fn verify_all_subset() {
    let dir = scratch("verify");
    let o = ruelle(&["verify-all", "--only", "1,4"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("acceptance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion  1 PASS"));
    assert_eq!(ruelle(&["verify-all", "--only", "12"], &dir).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_ruelle")).args(["suspension", "--help"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--k-max", "--nu-max", "--R", "--threshold", "--config"] {
        assert!(text.contains(flag), "{flag}");
    }
}
