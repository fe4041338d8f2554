use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otdenoise::harness::{read_report_csv, Method};
use otdenoise::metrics::PSNR_IDENTICAL;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otdenoise"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    let o = bin().args(args).arg("--out").arg(out).output().unwrap();
    if !o.status.success() {
        eprintln!("stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    }
    o
}

/// The single run directory created under `out`.
fn run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

#[test]
fn verify_default_grid_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let dir = run_dir(tmp.path());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["failures"], 0);
    assert_eq!(report["rows"].as_array().unwrap().len(), 300);
    assert!(dir.join("verify.csv").exists());
}

#[test]
fn verify_small_lambda_reports_without_failing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--lambda", "0.25"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(run_dir(tmp.path()).join("report.json")).unwrap()).unwrap();
    assert!(report["off_target_rows"].as_u64().unwrap() >= 1);
    assert_eq!(report["failures"], 0);
}

#[test]
fn malformed_flags_are_usage_errors_without_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    for args in [&["verify", "--instances", "many"][..], &["verify", "--bogus"], &["verify", "--lambda=-1"], &["frobnicate"]] {
        let o = run(args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn config_errors_name_field_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "seed = 1\nepochs = 10\nlambda = \"big\"\n").unwrap();
    let o = run(&["train", path.to_str().unwrap()], &tmp.path().join("runs"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`lambda`") && err.contains("line 3"), "{err}");
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn missing_config_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["train", "/nonexistent/config.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn train_emits_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("r{k}"));
        let o = run(&["train", config("smoke.toml").to_str().unwrap()], &out);
        assert_eq!(o.status.code(), Some(0));
        let dir = run_dir(&out);
        for f in ["config.toml", "metrics.csv", "curves.csv", "report.json", "manifest_unpaired.json", "checkpoints/ot.ckpt"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        assert_eq!(fs::read_to_string(dir.join("config.toml")).unwrap(), fs::read_to_string(config("smoke.toml")).unwrap());
        assert!(dir.join("previews/ot_000.pgm").exists());
        csvs.push(fs::read(dir.join("metrics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let rows = read_report_csv(csvs[0].as_slice()).unwrap();
    let methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    assert_eq!(methods, Method::ALL.to_vec());
}

#[test]
fn noise_free_identity_scores_sentinel() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["train", config("sigma0.toml").to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(run_dir(tmp.path()).join("metrics.csv")).unwrap();
    assert!(!text.to_lowercase().contains("nan"));
    let rows = read_report_csv(text.as_bytes()).unwrap();
    let identity = rows.iter().find(|r| r.method == Method::Identity).unwrap();
    assert_eq!(identity.metrics.psnr_db, PSNR_IDENTICAL);
    assert!(text.contains("identity,gaussian,0,,+inf,"));
}

#[test]
fn single_point_sweep_matches_train() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ot.toml");
    let mut text = fs::read_to_string(config("smoke.toml")).unwrap();
    text.push_str("methods = [\"ot\"]\n");
    fs::write(&path, &text).unwrap();
    let t = run(&["train", path.to_str().unwrap()], &tmp.path().join("t"));
    assert_eq!(t.status.code(), Some(0));
    let s = run(&["sweep", path.to_str().unwrap(), "--lambdas", "4"], &tmp.path().join("s"));
    assert_eq!(s.status.code(), Some(0));
    let train_rows = read_report_csv(fs::File::open(run_dir(&tmp.path().join("t")).join("metrics.csv")).unwrap()).unwrap();
    let sweep_rows = read_report_csv(fs::File::open(run_dir(&tmp.path().join("s")).join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(train_rows, sweep_rows);
}

#[test]
fn brown_config_reports_autocorrelation_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("brown.toml");
    let mut text = fs::read_to_string(config("smoke.toml")).unwrap();
    text.push_str("noise_kind = \"brown_gaussian\"\nsigma_255 = 50.0\nmethods = [\"identity\"]\n");
    fs::write(&path, &text).unwrap();
    let out = tmp.path().join("runs");
    let o = run(&["train", path.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run_dir(&out).join("report.json")).unwrap()).unwrap();
    let audit = &report["noise_audit"];
    assert_eq!(audit["kind"], "brown_gaussian");
    assert!(audit["lag1_autocorrelation"].as_f64().unwrap() > 0.5);
    assert_eq!(audit["autocorrelation_ok"], true);
}

#[test]
fn noise_audit_passes() {
    let o = bin().args(["noise-audit", "--json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let audits: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(audits.as_array().unwrap().len(), 3);
}

#[test]
fn metrics_on_preview_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("id.toml");
    let mut text = fs::read_to_string(config("smoke.toml")).unwrap();
    text.push_str("methods = [\"identity\"]\n");
    fs::write(&path, &text).unwrap();
    assert_eq!(run(&["train", path.to_str().unwrap()], &tmp.path().join("r")).status.code(), Some(0));
    let dir = run_dir(&tmp.path().join("r")).join("previews");
    let (clean, noisy) = (tmp.path().join("clean"), tmp.path().join("noisy"));
    fs::create_dir(&clean).unwrap();
    fs::create_dir(&noisy).unwrap();
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        if let Some(rest) = name.strip_prefix("clean_") {
            fs::copy(&p, clean.join(rest)).unwrap();
        } else if let Some(rest) = name.strip_prefix("noisy_") {
            fs::copy(&p, noisy.join(rest)).unwrap();
        }
    }
    let o = bin()
        .args(["metrics", "--clean", clean.to_str().unwrap(), "--restored", clean.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("psnr_db: +inf"));
    let o = bin()
        .args(["metrics", "--clean", clean.to_str().unwrap(), "--restored", noisy.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let psnr: f64 = text.lines().find_map(|l| l.strip_prefix("psnr_db: ")).unwrap().parse().unwrap();
    assert!(psnr.is_finite() && psnr > 10.0);
}
