use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
schema_version = 1
protocol = "plain"
seed = 7
shots = 4000

[sensor]
frequency_mhz = 4139.4

[reference]
phase_deg = 0

[[tones]]
rabi_khz = 2000
offset_hz = 20000
phase_deg = 0

[sequence]
sensing_ns = 100
laser_init_us = 1.0
readout_us = 0.5
sampling_interval_us = 2.0

[readout]
mean_photons = 0.1
contrast = 0.3

[analysis]
channel = "true_sz"
max_lag = 1000

[output]
record = "small.bin"
csv = true
"#;

fn hetsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetsense")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn simulate(dir: &Path, cfg: &str, sub: &str) -> std::path::PathBuf {
    let out = dir.join(sub);
    let r = hetsense(&["--out-dir", out.to_str().unwrap(), "simulate", "--config", cfg]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out
}

#[test]
fn simulate_then_analyze_finds_the_tone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = simulate(dir.path(), &cfg, "run");
    let record = out.join("small.bin");
    assert!(out.join("small.csv").exists());
    let r = hetsense(&["--out-dir", out.to_str().unwrap(), "analyze", record.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    // 20 kHz sampled at 500 kHz stays below Nyquist.
    let center = summary["peaks"][0]["center"].as_f64().unwrap();
    let resolution = summary["resolution"].as_f64().unwrap();
    assert!((center - 20000.0).abs() < resolution, "center {center}");
    for f in ["correlation.csv", "spectrum.csv", "peaks.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.starts_with("# hetsense "), "{f}");
    }
}

#[test]
fn csv_record_analyzes_like_the_binary_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = simulate(dir.path(), &cfg, "run");
    let mut centers = Vec::new();
    for (rec, sub) in [("small.bin", "a"), ("small.csv", "b")] {
        let o = dir.path().join(sub);
        let r = hetsense(&[
            "--out-dir",
            o.to_str().unwrap(),
            "analyze",
            out.join(rec).to_str().unwrap(),
            "--config",
            &cfg,
        ]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        centers.push(fs::read_to_string(o.join("peaks.csv")).unwrap());
    }
    assert_eq!(centers[0], centers[1]);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut records = Vec::new();
    for threads in ["1", "3", "1"] {
        let out = dir.path().join(format!("t{threads}-{}", records.len()));
        let r = hetsense(&["--threads", threads, "--out-dir", out.to_str().unwrap(), "simulate", "--config", &cfg]);
        assert_eq!(code(&r), 0);
        records.push(fs::read(out.join("small.bin")).unwrap());
    }
    assert_eq!(records[0], records[1]);
    assert_eq!(records[0], records[2]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = simulate(dir.path(), &cfg, "a");
    let b = dir.path().join("b");
    let r = hetsense(&["--out-dir", b.to_str().unwrap(), "simulate", "--config", &cfg, "--seed", "8"]);
    assert_eq!(code(&r), 0);
    assert_ne!(fs::read(a.join("small.bin")).unwrap(), fs::read(b.join("small.bin")).unwrap());
}

#[test]
fn brute_force_oracle_agrees_on_a_small_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", &SMALL.replace("channel = \"true_sz\"", "channel = \"counts\"").replace("mean_photons = 0.1", "mean_photons = 10"));
    let out = simulate(dir.path(), &cfg, "run");
    let r = hetsense(&[
        "--out-dir",
        out.to_str().unwrap(),
        "analyze",
        out.join("small.bin").to_str().unwrap(),
        "--config",
        &cfg,
        "--oracle-brute-force",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("FFT vs brute force"));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL.replace("contrast = 0.3", "contrast = 0.3\ncontrats = 1"));
    let r = hetsense(&["--out-dir", dir.path().to_str().unwrap(), "simulate", "--config", &cfg]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("readout"));
}

#[test]
fn zero_shots_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.toml", &SMALL.replace("shots = 4000", "shots = 0"));
    let r = hetsense(&["--out-dir", dir.path().to_str().unwrap(), "simulate", "--config", &cfg]);
    assert_eq!(code(&r), 2);
    assert!(!dir.path().join("small.bin").exists());
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v2.toml", &SMALL.replace("schema_version = 1", "schema_version = 2"));
    let r = hetsense(&["describe", "--config", &cfg]);
    assert_eq!(code(&r), 2);
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(code(&hetsense(&["simulate"])), 2);
    assert_eq!(code(&hetsense(&["frobnicate"])), 2);
    assert_eq!(code(&hetsense(&["--help"])), 0);
}

#[test]
fn zero_threads_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    assert_eq!(code(&hetsense(&["--threads", "0", "describe", "--config", &cfg])), 2);
}

#[test]
fn missing_files_exit_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&hetsense(&["describe", "--config", missing.to_str().unwrap()])), 3);
    let missing = dir.path().join("nope.bin");
    assert_eq!(code(&hetsense(&["--out-dir", dir.path().to_str().unwrap(), "analyze", missing.to_str().unwrap()])), 3);
}

#[test]
fn malformed_record_exits_with_record_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bin");
    fs::write(&bad, b"HSREC\0\0\0\x01\0\0\0garbage").unwrap();
    let r = hetsense(&["--out-dir", dir.path().to_str().unwrap(), "analyze", bad.to_str().unwrap()]);
    assert_eq!(code(&r), 4);

    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = simulate(dir.path(), &cfg, "run");
    let bytes = fs::read(out.join("small.bin")).unwrap();
    let truncated = dir.path().join("truncated.bin");
    fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
    let r = hetsense(&["--out-dir", dir.path().to_str().unwrap(), "analyze", truncated.to_str().unwrap()]);
    assert_eq!(code(&r), 4);
}

#[test]
fn missing_peak_exits_with_analysis_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = simulate(dir.path(), &cfg, "run");
    let quiet = SMALL.replace("max_lag = 1000", "max_lag = 1000\nsearch_low_hz = 100000\nsearch_high_hz = 120000");
    let quiet_cfg = write_config(dir.path(), "quiet.toml", &quiet);
    let r = hetsense(&[
        "--out-dir",
        out.to_str().unwrap(),
        "analyze",
        out.join("small.bin").to_str().unwrap(),
        "--config",
        &quiet_cfg,
    ]);
    assert_eq!(code(&r), 5, "{}", String::from_utf8_lossy(&r.stdout));
}

#[test]
fn scan_protocol_refuses_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/floquet_odmr.toml");
    assert_eq!(code(&hetsense(&["--out-dir", dir.path().to_str().unwrap(), "simulate", "--config", cfg])), 2);
}

#[test]
fn describe_and_sidebands_run_on_bundled_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(&cfgs).unwrap() {
        let path = entry.unwrap().path();
        let r = hetsense(&["describe", "--config", path.to_str().unwrap()]);
        assert_eq!(code(&r), 0, "{}: {}", path.display(), String::from_utf8_lossy(&r.stderr));
    }
    let rabi = cfgs.join("floquet_rabi.toml");
    let r = hetsense(&["--out-dir", dir.path().to_str().unwrap(), "sidebands", "--config", rabi.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let table = fs::read_to_string(dir.path().join("sidebands.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 1 + 7);
}
