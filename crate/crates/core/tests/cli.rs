//! End-to-end tests of the `enaqt` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_network.json")
}

fn enaqt(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enaqt")).args(args).env("ENAQT_OUTPUT_DIR", out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Copy of the bundled config with grids shrunk for speed.
fn small_config(dir: &Path) -> PathBuf {
    let mut v: Value = serde_json::from_slice(&std::fs::read(bundled_config()).unwrap()).unwrap();
    v["experiment"]["bandwidth_grid_nm"] = serde_json::json!({ "start": 0.0, "stop": 40.0, "step": 20.0 });
    v["experiment"]["z_grid_cm"] = serde_json::json!({ "start": 0.0, "stop": 6.0, "step": 1.0 });
    let path = dir.join("small.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn print_defaults_matches_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = enaqt(&["--print-defaults"], dir.path());
    assert!(o.status.success());
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, read_json(&bundled_config()));
}

#[test]
fn empty_config_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, "").unwrap();
    let o = enaqt(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `network`"), "{}", stderr(&o));
}

#[test]
fn negative_coupling_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&bundled_config());
    v["network"]["couplings"][1]["coupling_per_cm"] = (-1.0).into();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = enaqt(&["sweep-wavelength", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("network.couplings[1].coupling_per_cm"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&bundled_config());
    v["output"]["dir"] = "x".into();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = enaqt(&["check", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("output.dir: unknown field `dir`"), "{}", stderr(&o));
}

#[test]
fn missing_file_and_bad_usage_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(enaqt(&["map", "/nonexistent/config.json"], dir.path()).status.code(), Some(2));
    assert_eq!(enaqt(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(enaqt(&[], dir.path()).status.code(), Some(2));
    assert_eq!(enaqt(&["check", "--workers", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn unwritable_output_directory_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = enaqt(&["simulate", small_config(dir.path()).to_str().unwrap()], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_wavelength_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config();
    let o = enaqt(&["sweep-wavelength", cfg.to_str().unwrap(), "--workers", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sweep-wavelength.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "wavelength_nm,efficiency");
    assert_eq!(lines.len(), 92);
    assert!(lines[1].starts_with("745,"));
    assert!(lines[91].starts_with("835,"));

    let m = read_json(&dir.path().join("sweep-wavelength.manifest.json"));
    assert_eq!(m["experiment"]["subcommand"], "sweep-wavelength");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"], read_json(&cfg));
    assert_eq!(m["outputs"][0]["file"], "sweep-wavelength.csv");
    assert_eq!(m["input_sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(m["started_at"].as_str().unwrap() <= m["finished_at"].as_str().unwrap());
}

#[test]
fn map_extended_covers_the_long_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = enaqt(&["map", "--extended"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("map-extended.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z_cm,gamma_per_cm,efficiency,enhancement"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101 * 21);
    let last = rows.last().unwrap();
    assert_eq!((last[0], last[1]), (500.0, 0.5));
    assert!(last[2] >= 0.95);
}

#[test]
fn check_passes_on_design_network() {
    let dir = tempfile::tempdir().unwrap();
    let o = enaqt(&["check", bundled_config().to_str().unwrap()], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    for name in ["dark_state_bound", "sink_no_return", "quadrature_convergence"] {
        assert!(stdout.contains(&format!("PASS {name}")), "{stdout}");
    }
    assert!(!stdout.contains("FAIL"));
    assert!(dir.path().join("check.csv").exists());
}

#[test]
fn check_fails_with_short_sink() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&bundled_config());
    v["network"]["sink"]["n_sink_guides"] = 21.into();
    let cfg = dir.path().join("short.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = enaqt(&["check", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL sink_no_return"));
}

#[test]
fn output_dir_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&small_config(dir.path()));
    v["output"]["directory"] = dir.path().join("from-config").to_str().unwrap().into();
    v["output"]["formats"] = serde_json::json!(["csv", "json"]);
    let cfg = dir.path().join("dir.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let env_dir = dir.path().join("from-env");
    assert!(enaqt(&["simulate", cfg.to_str().unwrap()], &env_dir).status.success());
    assert!(env_dir.join("simulate.csv").exists());
    assert!(env_dir.join("simulate.json").exists());
    assert!(!dir.path().join("from-config").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_enaqt"))
        .args(["simulate", cfg.to_str().unwrap()])
        .env_remove("ENAQT_OUTPUT_DIR")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from-config/simulate.csv").exists());
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = dir.path().join("first");
    assert!(enaqt(&["sweep-bandwidth", cfg.to_str().unwrap(), "--workers", "3"], &first).status.success());
    let manifest = first.join("sweep-bandwidth.manifest.json");
    let original = std::fs::read(first.join("sweep-bandwidth.csv")).unwrap();

    let second = dir.path().join("second");
    let o = enaqt(&["rerun", manifest.to_str().unwrap(), "--workers", "1"], &second);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(second.join("sweep-bandwidth.csv")).unwrap(), original);

    let mut m = read_json(&manifest);
    m["outputs"][0]["sha256"] = "0".repeat(64).into();
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, m.to_string()).unwrap();
    let o = enaqt(&["rerun", tampered.to_str().unwrap()], &dir.path().join("third"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn calibrate_emits_fit_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("couplings.csv");
    let rows: String = (0..6)
        .map(|k| {
            let d = 10.0 + 2.0 * k as f64;
            format!("{d},{}\n", 12.0 * (-d / 5.0f64).exp())
        })
        .collect();
    std::fs::write(&csv, format!("separation_um,coupling_per_cm\n{rows}")).unwrap();
    let o = enaqt(&["calibrate", csv.to_str().unwrap(), "--target-coupling-per-cm", "1.0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["amplitude_per_cm"].as_f64().unwrap() - 12.0).abs() < 1e-9);
    assert!((v["decay_length_um"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    let d = v["target"]["separation_um"].as_f64().unwrap();
    assert!((d - 5.0 * 12f64.ln()).abs() < 1e-9);
    assert_eq!(v["target"]["extrapolated"], false);

    std::fs::write(&csv, "10,1.0\n").unwrap();
    assert_eq!(enaqt(&["calibrate", csv.to_str().unwrap()], dir.path()).status.code(), Some(3));
    std::fs::write(&csv, "10,1.0\n12,abc\n").unwrap();
    assert_eq!(enaqt(&["calibrate", csv.to_str().unwrap()], dir.path()).status.code(), Some(2));
}
