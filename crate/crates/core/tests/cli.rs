//! End-to-end tests of the candlebt binary: exit codes, warning counts,
//! determinism of written reports, and the verify subcommand.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_candlebt"))
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

const CANDLES: &str = "timestamp,open,high,low,close\n\
    2020-01-02T00:00,10.0,11.0,9.0,10.0\n\
    2020-01-03T00:00,10.0,11.0,9.0,10.0\n\
    2020-01-06T00:00,10.0,15.0,5.0,9.0\n";

const SCRIPT: &str = r#"[
    {"at": "2020-01-02T00:00:00Z", "action": "submit",
     "order": {"side": "long", "trigger": {"type": "limit", "limit": 10.0},
               "stop_loss": 6.0, "target": 14.0, "id": "t1"}}
]"#;

fn run_report(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let candles = write(dir, "candles.csv", CANDLES);
    let script = write(dir, "script.json", SCRIPT);
    let mut cmd = bin();
    cmd.args([
        "run",
        "--candles",
        &candles,
        "--script",
        &script,
        "--policy",
        "wc",
        "--tick-size",
        "1.0",
        "--out",
        &dir.join(out).to_string_lossy(),
    ]);
    cmd.args(extra);
    cmd.output().unwrap()
}

#[test]
fn run_happy_path_writes_report_and_warns_once_per_snu() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_report(dir.path(), "report.json", &[]);
    assert!(output.status.success(), "{output:?}");
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.matches("WARNING: SNU").count(), 1, "{stderr}");
    // Machine-readable output stays off stderr-only streams.
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"snu_log\""));
}

#[test]
fn one_warning_line_per_snu() {
    // Three trades, each closed by an ambiguous both-brackets candle.
    let candles = "timestamp,open,high,low,close\n\
        2020-01-02T00:00,10,11,9,10\n\
        2020-01-03T00:00,10,11,9,10\n\
        2020-01-04T00:00,10,15,5,9\n\
        2020-01-05T00:00,10,11,9,10\n\
        2020-01-06T00:00,10,15,5,9\n\
        2020-01-07T00:00,10,11,9,10\n\
        2020-01-08T00:00,10,15,5,9\n";
    let order = |id: &str, at: &str| {
        format!(
            r#"{{"at": "{at}", "action": "submit",
                 "order": {{"side": "long", "trigger": {{"type": "limit", "limit": 10.0}},
                           "stop_loss": 6.0, "target": 14.0, "id": "{id}"}}}}"#
        )
    };
    let script = format!(
        "[{},{},{}]",
        order("t1", "2020-01-02T00:00:00Z"),
        order("t2", "2020-01-04T12:00:00Z"),
        order("t3", "2020-01-06T12:00:00Z")
    );
    let dir = tempfile::tempdir().unwrap();
    let candles = write(dir.path(), "candles.csv", candles);
    let script = write(dir.path(), "script.json", &script);
    let out = bin()
        .args([
            "run",
            "--candles",
            &candles,
            "--script",
            &script,
            "--policy",
            "bc",
            "--tick-size",
            "1.0",
            "--out",
            &dir.path().join("r.json").to_string_lossy(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.matches("WARNING: SNU").count(), 3, "{stderr}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["trade_count"], 3);
    assert_eq!(report["snu_log"].as_array().unwrap().len(), 3);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_report(dir.path(), "a.json", &[]);
    let b = run_report(dir.path(), "b.json", &[]);
    assert!(a.status.success() && b.status.success());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_format_writes_one_file_per_section() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_report(dir.path(), "report.csv", &["--format", "csv"]);
    assert!(output.status.success(), "{output:?}");
    for section in [
        "report.trades.csv",
        "report.snu_log.csv",
        "report.summary.csv",
    ] {
        assert!(dir.path().join(section).exists(), "missing {section}");
    }
}

#[test]
fn config_errors_exit_1() {
    let out = bin().args(["run", "--policy", "zz"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Exact policy without finer data fails fast.
    let dir = tempfile::tempdir().unwrap();
    let candles = write(dir.path(), "candles.csv", CANDLES);
    let script = write(dir.path(), "script.json", SCRIPT);
    let out = bin()
        .args([
            "run",
            "--candles",
            &candles,
            "--script",
            &script,
            "--policy",
            "ex",
            "--tick-size",
            "1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let candles = write(
        dir.path(),
        "bad.csv",
        "timestamp,open,high,low,close\n2020-01-02,10,9,11,10\n",
    );
    let script = write(dir.path(), "script.json", SCRIPT);
    let out = bin()
        .args([
            "run",
            "--candles",
            &candles,
            "--script",
            &script,
            "--policy",
            "wc",
            "--tick-size",
            "1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn config_file_supplies_flags_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let candles = write(dir.path(), "candles.csv", CANDLES);
    let script = write(dir.path(), "script.json", SCRIPT);
    let out_path = dir.path().join("r.json");
    let config = write(
        dir.path(),
        "config.json",
        &format!(
            r#"{{"candles": {candles:?}, "script": {script:?}, "policy": "bc",
                 "tick_size": 1.0, "out": {:?}}}"#,
            out_path.to_string_lossy()
        ),
    );
    // Flag overrides the config's bc with wc.
    let out = bin()
        .args(["run", "--config", &config, "--policy", "wc"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report = std::fs::read_to_string(&out_path).unwrap();
    assert!(report.contains("\"policy\": \"wc\""));
}

#[test]
fn compare_emits_divergence_and_band() {
    let dir = tempfile::tempdir().unwrap();
    let candles = write(dir.path(), "candles.csv", CANDLES);
    let script = write(dir.path(), "script.json", SCRIPT);
    let out = bin()
        .args([
            "compare",
            "--candles",
            &candles,
            "--script",
            &script,
            "--policies",
            "wc,bc,ig",
            "--tick-size",
            "1.0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("equity band (bc - wc): 8 ticks"),
        "{stderr}"
    );
    let comparison: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(comparison["divergence"]["band_width_ticks"], 8);
}

#[test]
fn verify_small_radius_passes() {
    let out = bin().args(["verify", "--radius", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("engine matches oracle"), "{stdout}");
    assert!(stdout.contains("LIMIT+SL+TARGET"), "{stdout}");
}
