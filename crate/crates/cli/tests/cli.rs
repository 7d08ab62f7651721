use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("complementary-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_complementary"))
        .arg("--config")
        .arg(cfg)
        .arg("--out-dir")
        .arg(out)
        .args(["--threads", "2"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn sweep_writes_csv_and_json() {
    let out = out_dir("sweep");
    let o = run(&config("compatible.toml"), &out, &["sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("delta,"));
    assert_eq!(lines.count(), 5);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn check_complementary_reports_json() {
    let out = out_dir("check");
    let o = run(&config("compatible.toml"), &out, &["check-complementary"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["verdict"], serde_json::Value::Bool(true));
}

#[test]
fn spectral_solve_writes_modes() {
    let out = out_dir("spectral");
    let file = out.join("nested").join("modes.json");
    let o = run(&config("compatible.toml"), &out, &["spectral", "solve", "--delta", "1e-3", "--modes", "4", "--out", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(json["delta"].as_f64(), Some(1e-3));
    assert!(!json["modes"].as_array().unwrap().is_empty());
}

#[test]
fn render_is_reproducible() {
    let a = out_dir("render-a");
    let b = out_dir("render-b");
    for d in [&a, &b] {
        assert_eq!(run(&config("compatible.toml"), d, &["render"]).status.code(), Some(0));
    }
    let sa = std::fs::read(a.join("field.svg")).unwrap();
    assert_eq!(sa, std::fs::read(b.join("field.svg")).unwrap());
    assert!(sa.starts_with(b"<svg"));
}

#[test]
fn blowup_on_compatible_source_is_refused() {
    let out = out_dir("refuse");
    let o = run(&config("compatible.toml"), &out, &["blowup"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
}

#[test]
fn invalid_config_exits_3_with_paths() {
    let dir = out_dir("invalid");
    let cfg = write_config(&dir, "[layout]\nr1 = 2.0\nr2 = 1.0\nR = 8.0\n\n[[source]]\nn = 1\nr0 = 5.0\n\n[sweep]\ndeltas = [1e-2, 1e-1]\n");
    let o = run(&cfg, &dir, &["sweep"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("layout"), "{err}");
    assert!(err.contains("sweep.deltas"), "{err}");
}

#[test]
fn oversized_raster_exits_3() {
    let dir = out_dir("raster");
    let cfg = write_config(&dir, "[layout]\nr1 = 1.0\nr2 = 2.0\nR = 8.0\n\n[[source]]\nn = 1\nr0 = 5.0\n\n[render]\nwidth = 4000\nheight = 4000\n");
    let o = run(&cfg, &dir, &["render"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.join("field.svg").exists());
}

#[test]
fn missing_config_exits_3() {
    let o = Command::new(env!("CARGO_BIN_EXE_complementary")).arg("sweep").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}
