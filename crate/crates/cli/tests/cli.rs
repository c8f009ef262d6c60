use std::path::Path;
use std::process::{Command, Output};

fn harmloc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmloc"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

#[test]
fn simulate_then_localize() {
    let d = tempfile::tempdir().unwrap();
    let caps = d.path().join("caps");
    let o = harmloc(
        &["simulate", "--scenario", "air/c1+rx3", "--duration", "0.02", "--seed", "7"],
        &caps,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["captures"].as_array().unwrap().len(), 6);
    assert!(caps.join("RX1_910MHz.cf32").is_file());
    assert!(caps.join("RX3_1700MHz.json").is_file());

    let o = harmloc(
        &[
            "localize",
            "--scenario",
            "air/c1+rx3",
            "--truth",
            "30,18,11.1",
            "--snr-floor",
            "-30",
            caps.to_str().unwrap(),
        ],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["measurements"], 6);
    assert!(v["error_cm"].as_f64().unwrap() < 1.0, "{v}");
    assert_eq!(v["position_cm"].as_array().unwrap().len(), 3);
}

#[test]
fn analyze_with_baseline() {
    let d = tempfile::tempdir().unwrap();
    let with = d.path().join("with");
    let without = d.path().join("without");
    for (dir, extra) in [(&with, None), (&without, Some("--no-device"))] {
        let mut args = vec!["simulate", "--scenario", "air/c1", "--duration", "0.02"];
        args.extend(extra);
        assert!(harmloc(&args, dir).status.success());
    }
    let o = harmloc(
        &[
            "analyze",
            with.join("RX1_910MHz.cf32").to_str().unwrap(),
            "--baseline",
            without.join("RX1_910MHz.cf32").to_str().unwrap(),
            "--fft-size",
            "1024",
        ],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["relative_gain_db"].as_f64().unwrap() > 1.0, "{v}");
    let csv = std::fs::read_to_string(d.path().join("RX1_910MHz_psd.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("freq_hz,power_db"));
    assert_eq!(csv.lines().count(), 1025);
}

#[test]
fn sweep_writes_report() {
    let d = tempfile::tempdir().unwrap();
    let spec = d.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"base": "chicken/c1", "axis": "device_y", "values": [0, 10, 20, 30, 40, 50, 60, 70],
            "duration_s": 0.01, "fft_size": 1024, "name": "grid"}"#,
    )
    .unwrap();
    let out = d.path().join("out");
    for fmt in ["csv", "svg"] {
        let o = harmloc(&["sweep", spec.to_str().unwrap(), "--format", fmt], &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout_json(&o)["rows"], 8);
    }
    let csv = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(std::fs::read_to_string(out.join("grid.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn sweep_row_failure_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let scenario = d.path().join("s.json");
    // inline scenario whose receiver sits where the y = 0 row puts the device
    let mut s = harmloc::presets::air_c1();
    s.antennas[1].position = harmloc::Position::from_cm([30.0, 0.0, 11.1]);
    std::fs::write(&scenario, harmloc::scenario_file::scenario_to_json(&s).unwrap()).unwrap();
    let spec = d.path().join("spec.json");
    std::fs::write(
        &spec,
        format!(
            r#"{{"base": "{}", "axis": "device_y", "values": [10, 0], "duration_s": 0.01, "fft_size": 1024}}"#,
            scenario.display()
        ),
    )
    .unwrap();
    let o = harmloc(&["sweep", spec.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["failed_rows"], 1);
}

#[test]
fn montecarlo_writes_tables() {
    let d = tempfile::tempdir().unwrap();
    let o = harmloc(
        &[
            "montecarlo",
            "--scenario",
            "air/c1+rx3",
            "--trials",
            "1",
            "--noise",
            "off",
            "--subset",
            "RX1,RX2,RX3",
            "--duration",
            "0.001",
        ],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(d.path().join("montecarlo_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "-inf");
    assert_eq!(row[1], "RX1+RX2+RX3");
    assert!(row[4].parse::<f64>().unwrap() < 0.1);
    assert!(d.path().join("montecarlo_trials.csv").is_file());
}

#[test]
fn validation_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    let o = harmloc(&["simulate", "--scenario", "nowhere/c9"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preset"));
    let o = harmloc(&["simulate", "--scenario", "air/c1", "--duration", "0"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let o = harmloc(&["frobnicate"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let spec = d.path().join("bad.json");
    std::fs::write(&spec, r#"{"base": "air/c1", "axis": "device_y", "values": [95]}"#).unwrap();
    assert_eq!(harmloc(&["sweep", spec.to_str().unwrap()], d.path()).status.code(), Some(1));
}
