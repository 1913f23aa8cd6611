//! End-to-end checks of the `turbkd` binary: exit codes, audit headers,
//! and override precedence, exercised through the real executable.

use std::process::Command;
use tempfile::TempDir;

fn turbkd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_turbkd"))
}

#[test]
fn rate_curve_succeeds_with_defaults() {
    let dir = TempDir::new().unwrap();
    let output = turbkd()
        .args(["rate-curve", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    assert!(dir.path().join("rate_curve.csv").exists());
    assert!(dir.path().join("critical.csv").exists());
    assert!(dir.path().join("rate_curve.svg").exists());
}

#[test]
fn no_key_scenario_exits_3_with_artifact() {
    let dir = TempDir::new().unwrap();
    let output = turbkd()
        .args([
            "prts",
            "--set",
            "channel.loss_db=19",
            "--set",
            "selection.mode=fixed",
            "--set",
            "selection.eta_th=0.016",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{output:?}");
    // the zero-rate report still gets written
    let text = std::fs::read_to_string(dir.path().join("prts.csv")).unwrap();
    let data = text.lines().last().unwrap();
    assert!(
        data.contains(",0,0,"),
        "expected a zero-key row, got {data}"
    );
}

#[test]
fn malformed_config_exits_2_with_line_diagnostics() {
    let dir = TempDir::new().unwrap();
    let config_path = dir.path().join("bad.conf");
    std::fs::write(&config_path, "[channel]\nloss_db = fifteen\n").unwrap();
    let output = turbkd()
        .args(["scan", "--config"])
        .arg(&config_path)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bad.conf:2"), "stderr: {stderr}");
}

#[test]
fn unknown_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let output = turbkd()
        .args(["scan", "--set", "channel.bogus=1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn csv_headers_echo_the_resolved_config() {
    let dir = TempDir::new().unwrap();
    let output = turbkd()
        .args(["scan", "--set", "channel.loss_db=13", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let text = std::fs::read_to_string(dir.path().join("arts_scan.csv")).unwrap();
    assert!(text.starts_with("# turbkd scan"));
    assert!(text.contains("#   loss_db = 13"));
    assert!(text.contains("#   sigma = 0.9"));
    assert!(text.contains("eta_th,survival,eta_mean,n_post,ell,rate,log10_rate,is_best"));
}

#[test]
fn command_line_seed_overrides_file_and_sets() {
    let dir_a = TempDir::new().unwrap();
    let dir_b = TempDir::new().unwrap();
    // same scenario, different seeds: session logs must differ
    for (dir, seed) in [(&dir_a, "1"), (&dir_b, "2")] {
        let output = turbkd()
            .args([
                "simulate",
                "--set",
                "simulation.seed=9",
                "--set",
                "security.n_pulses=1e7",
                "--seed",
                seed,
                "--out",
            ])
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(3), "{output:?}"); // no key at 1e7
    }
    let a = std::fs::read(dir_a.path().join("session_bins.txt")).unwrap();
    let b = std::fs::read(dir_b.path().join("session_bins.txt")).unwrap();
    assert_ne!(
        a, b,
        "--seed must take precedence over --set simulation.seed"
    );
}

#[test]
fn calibrate_writes_the_full_artifact_set() {
    let dir = TempDir::new().unwrap();
    let output = turbkd()
        .args(["calibrate", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    for name in [
        "calibration_points.csv",
        "calibration_poly.txt",
        "roundtrip.csv",
        "sample_waveform.txt",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    // the persisted polynomial parses back
    let text = std::fs::read(dir.path().join("calibration_poly.txt")).unwrap();
    let cal = turbkd::probe::CalibrationPoly::read_text(&text[..]).unwrap();
    assert!(cal.coefficients.len() >= 2);
}
