use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn superamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superamp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr_lines(o: &Output) -> usize {
    String::from_utf8_lossy(&o.stderr).lines().count()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn superlinear_run_peaks_near_prediction() {
    let o = superamp(&[
        "run", "--algo", "superlinear", "--n-qubits", "12", "--source", "0", "--target", "37",
        "--format", "json",
    ]);
    let v = json(&o);
    let s = &v["summary"];
    assert_eq!(s["peak_step"], 71);
    let ratio = s["ratio_to_prediction"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() <= 0.03, "{ratio}");
    assert!(s["peak_amplitude"].as_f64().unwrap() >= 0.99);
}

#[test]
fn grover_run_peaks_at_fifty() {
    let v = json(&superamp(&["run", "--algo", "grover", "--n-qubits", "12", "--format", "json"]));
    assert_eq!(v["summary"]["peak_step"], 50);
}

#[test]
fn csv_run_writes_trace_and_summary_sibling() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = superamp(&[
        "run", "--algo", "superlinear", "--n", "1024", "--stride", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("step,target_re,target_im,source_re"));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["n"], 1024);
    let steps: Vec<u64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(steps[0], 0);
    assert_eq!(steps[1], 5);
}

#[test]
fn ode_run_matches_closed_form() {
    let v = json(&superamp(&["run", "--algo", "ode", "--n", "4096", "--dt", "0.01", "--format", "json"]));
    let s = &v["summary"];
    assert!(s["max_abs_err"].as_f64().unwrap() <= 1e-6);
    assert!(s["max_conservation_err"].as_f64().unwrap() <= 1e-9);
    assert!(s["predictions"]["critical_iterations"]["value"].as_f64().unwrap() > 71.0);
}

#[test]
fn ode_csv_has_error_column() {
    let o = superamp(&["run", "--algo", "ode", "--n", "256", "--stride", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,A,S,T,closed_form_T,abs_err"));
    for l in lines {
        let err: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err <= 1e-6);
    }
}

#[test]
fn verify_passes_and_flags_exact_form() {
    let v = json(&superamp(&["verify", "--format", "json"]));
    let checks = v["report"]["checks"].as_array().unwrap();
    let find = |name: &str| checks.iter().find(|c| c["name"] == name).unwrap().clone();
    assert_eq!(find("superlinear_ts_exact_form")["pass"], true);
    assert_eq!(find("superlinear_ts_printed_form")["kind"], "informational");
    assert!(find("two_dim_obstruction")["residuals"]["max_residual"].as_f64().unwrap() <= 1e-12);
    for c in checks {
        assert_ne!(c["pass"], false, "{}", c["name"]);
    }
}

#[test]
fn verify_csv_and_sizes() {
    let o = superamp(&["verify", "--sizes", "2,4", "--seed", "7"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("check,kind,residual,value,tolerance,pass\n"));
    let o = superamp(&["verify", "--sizes", "4,512"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_lines(&o), 1);
}

#[test]
fn expand_depths() {
    let o = superamp(&["expand", "--depth", "1", "--target", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let toks: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(toks, ["PHASE -1", "D", "IT 7", "IS 0", "D"]);

    let v = json(&superamp(&["expand", "--depth", "0", "--target", "7", "--format", "json"]));
    assert_eq!(v["tokens"], serde_json::json!(["PHASE 1", "D"]));

    let v = json(&superamp(&["expand", "--depth", "3", "--n", "16", "--format", "json"]));
    assert_eq!(v["ledger"]["it_count"], 7);
    assert_eq!(v["ledger"]["d_count"], 8);
    assert!(v["tokens"].as_array().unwrap().contains(&Value::from("IT 15")));
}

#[test]
fn expand_text_parses_back() {
    let o = superamp(&["expand", "--depth", "2", "--base", "w_i0_w", "--source", "3", "--target", "5"]);
    assert!(o.status.success());
    let seq = superamp::gatelist::from_text(&stdout(&o)).unwrap();
    assert_eq!(seq.ledger().w_count, 8);
    assert_eq!(seq.ledger().it_count, 3);
}

#[test]
fn sweep_scaling_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = superamp(&[
        "sweep", "--n-list", "65536,1024,2048,4096,8192,16384,32768", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 7);
    let ns: Vec<usize> = rows.iter().map(|r| r[col("n")].parse().unwrap()).collect();
    assert!(ns.windows(2).all(|w| w[0] < w[1]));
    let f = |r: &Vec<String>, name: &str| -> f64 { r[col(name)].parse().unwrap() };
    let target = std::f64::consts::PI / (2.0 * 2f64.sqrt());
    for r in &rows {
        let e = f(r, "fit_exponent");
        assert!((1.9..=2.1).contains(&e), "exponent {e}");
        let c = f(r, "peak_over_sqrt_n");
        assert!((c / target - 1.0).abs() <= 0.03, "peak/sqrt(N) {c}");
        let g = f(r, "grover_over_superlinear");
        assert!((g * 2f64.sqrt() - 1.0).abs() <= 0.05, "grover ratio {g}");
        assert!(r[col("error")].is_empty());
    }
}

#[test]
fn sweep_with_bad_row_records_it_and_fails() {
    let o = superamp(&["sweep", "--n-list", "64,96"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_lines(&o), 1);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().starts_with("96,,"));
}

#[test]
fn error_exit_codes_and_single_line() {
    let cases: &[(&[&str], i32)] = &[
        (&["run", "--algo", "grover", "--n", "100"], 2),
        (&["run", "--algo", "grover", "--n-qubits", "4", "--source", "3", "--target", "3"], 2),
        (&["run", "--algo", "grover", "--n-qubits", "4", "--target", "16"], 2),
        (&["run", "--algo", "grover", "--n-qubits", "30"], 2),
        (&["run", "--algo", "grover", "--n-qubits", "10", "--max-qubits", "8"], 2),
        (&["run", "--algo", "nope"], 2),
        (&["run", "--bogus"], 2),
        (&["frobnicate"], 2),
        (&["run", "--algo", "grover"], 2),
        (&["run", "--config", "/nonexistent/cfg.json"], 4),
        (&["run", "--algo", "grover", "--n-qubits", "4", "--out", "/nonexistent/dir/x.csv"], 4),
    ];
    for (args, code) in cases {
        let o = superamp(args);
        assert_eq!(o.status.code(), Some(*code), "{args:?}");
        assert_eq!(stderr_lines(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn bad_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"algo": "grover", "qubits": 4}"#).unwrap();
    let o = superamp(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_lines(&o), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"algo": "grover", "n_qubits": 6, "target": 5, "format": "json"}"#).unwrap();
    let v = json(&superamp(&["run", "--config", p.to_str().unwrap(), "--target", "9"]));
    assert_eq!(v["config"]["algo"], "grover");
    assert_eq!(v["summary"]["target"], 9);
    assert_eq!(v["summary"]["n"], 64);
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", out.to_str().unwrap()]);
    let o = superamp(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["run", "--algo", "standard_aa", "--n-qubits", "8", "--base", "d", "--format", "json"],
        &["verify", "--seed", "11", "--format", "json"],
        &["sweep", "--n-list", "256,1024,4096"],
    ];
    for (i, args) in cases.iter().enumerate() {
        // same path both times: the echoed config includes it
        let a = run_to(dir.path(), &format!("r{i}"), args);
        let b = run_to(dir.path(), &format!("r{i}"), args);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn echoed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_to(
        dir.path(),
        "r.json",
        &["run", "--algo", "superlinear", "--n-qubits", "8", "--stride", "2", "--seed", "5", "--format", "json"],
    );
    let v: Value = serde_json::from_slice(&rec).unwrap();
    let echo = dir.path().join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let cfg = superamp_cli::config::ExperimentConfig::from_file(&echo).unwrap();
    assert_eq!(serde_json::to_value(&cfg).unwrap(), v["config"]);

    // re-running from the echo alone reproduces the record
    let o = superamp(&["run", "--config", echo.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(dir.path().join("r.json")).unwrap(), rec);
}

#[test]
fn standard_aa_over_diffusion_peaks_near_prediction() {
    let v = json(&superamp(&["run", "--algo", "standard_aa", "--n-qubits", "6", "--base", "d", "--format", "json"]));
    let s = &v["summary"];
    let peak = s["peak_step"].as_f64().unwrap();
    let pred = s["predicted_step"].as_f64().unwrap();
    assert!((peak - pred).abs() <= 1.0, "{peak} vs {pred}");
}
