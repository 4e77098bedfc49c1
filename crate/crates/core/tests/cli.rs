use std::path::Path;
use std::process::Command;

use twistlab::cli::*;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["twistlab"];
    argv.extend_from_slice(args);
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn config_file(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn column<'a>(csv: &'a str, name: &str) -> Vec<&'a str> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap()).collect()
}

#[test]
fn float_format_has_seventeen_significant_digits() {
    assert_eq!(format_float(1.0), "1.0000000000000000e0");
    assert_eq!(format_float(0.0), "0.0000000000000000e0");
    assert_eq!(format_float(-2.5e-7), "-2.4999999999999999e-7");
    for v in [0.1, std::f64::consts::PI, 1e-300, -123456.789] {
        assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }
}

#[test]
fn fcs_at_zero_counting_field_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(dir.path(), "c.json", r#"{"params": {"lambdas": [-0.2, -0.1, 0.0, 0.1, 0.2], "betas": [1.0]}}"#);
    let (code, csv, _) = run(&["fcs", "--config", &cfg]);
    assert_eq!(code, 0);
    let lambdas = column(&csv, "lambda");
    let k = lambdas.iter().position(|l| *l == "0.0000000000000000e0").unwrap();
    assert_eq!(column(&csv, "value_re")[k], "1.0000000000000000e0");
    assert_eq!(column(&csv, "value_im")[k], "0.0000000000000000e0");
}

#[test]
fn reruns_are_byte_identical() {
    for exp in ["toda", "fcs", "twist-check", "entropy"] {
        let (c1, a, _) = run(&[exp, "--seed", "17"]);
        let (c2, b, _) = run(&[exp, "--seed", "17", "--threads", "3"]);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(a, b, "{exp}");
    }
    let (_, a, _) = run(&["toda", "--seed", "1"]);
    let (_, b, _) = run(&["toda", "--seed", "2"]);
    assert_ne!(a, b);
}

#[test]
fn config_hash_ignores_output_settings() {
    let base = RunConfig::default_for(ExperimentKind::Toda);
    let mut other = base.clone();
    other.output = Some("somewhere".into());
    other.threads = Some(4);
    other.format = OutputFormat::Json;
    assert_eq!(base.config_hash(), other.config_hash());
    other.seed = 9;
    assert_ne!(base.config_hash(), other.config_hash());
    let reparsed = RunConfig::from_json(&base.to_json(), None).unwrap();
    assert_eq!(reparsed, base);
}

#[test]
fn entropy_methods_agree_at_seven_sites() {
    let (code, csv, _) = run(&["entropy"]);
    assert_eq!(code, 0);
    let rep = column(&csv, "renyi_replica");
    let rdm = column(&csv, "renyi_rdm");
    assert_eq!(rep.len(), 3);
    for (a, b) in rep.iter().zip(&rdm) {
        let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        assert!((a - b).abs() <= 1e-10);
        assert!(a > 0.0);
    }
}

#[test]
fn empty_sweep_gives_header_only_csv() {
    let mut cfg = RunConfig::default_for(ExperimentKind::Toda);
    if let Params::Toda(p) = &mut cfg.params {
        p.lambdas.clear();
    }
    let set = run_experiment(&cfg).unwrap();
    assert!(set.records.is_empty());
    let csv = emit_csv(&set);
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("index,config_hash,lambda,x,mean,stderr,oracle,deviation_sigma,"));
}

#[test]
fn json_round_trip() {
    for kind in [ExperimentKind::Fcs, ExperimentKind::Ed, ExperimentKind::Entropy] {
        let set = run_experiment(&RunConfig::default_for(kind)).unwrap();
        let json = emit_json(&set).unwrap();
        let back: Vec<ResultRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set.records);
    }
}

#[test]
fn complex_columns_are_split() {
    let set = run_experiment(&RunConfig::default_for(ExperimentKind::Fcs)).unwrap();
    let header = emit_csv(&set).lines().next().unwrap().to_string();
    assert!(header.contains("value_re,value_im,log_value_re,log_value_im"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"experiment": "fcs", "bogus": 1}"#,
        r#"{"params": {"model": {"family": "xx", "j": 1, "field": 0, "length": 8, "boundary": "open", "extra": 0}}}"#,
        r#"{"params": {"lambdas": [0.5, 0.1]}}"#,
        r#"{"experiment": "toda"}"#,
        r#"{"params": {"betas": [-1.0]}}"#,
        r#"not json"#,
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = config_file(dir.path(), &format!("c{i}.json"), body);
        let (code, _, err) = run(&["fcs", "--config", &cfg]);
        assert_eq!(code, 2, "{body}: {err}");
    }
    assert_eq!(run(&["fcs", "--threads", "0"]).0, 2);
    assert_eq!(run(&["fcs", "--format", "xml"]).0, 2);
    assert_eq!(run(&["nonsense"]).0, 2);
    assert_eq!(run(&["fcs", "--config", "/nonexistent/c.json"]).0, 2);
}

#[test]
fn capacity_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(
        dir.path(),
        "c.json",
        r#"{"params": {"model": {"family": "xx", "j": 1, "field": 0, "length": 20, "boundary": "open"}, "methods": ["replica"]}}"#,
    );
    assert_eq!(run(&["entropy", "--config", &cfg]).0, 3);
    let cfg = config_file(
        dir.path(),
        "d.json",
        r#"{"params": {"model": {"family": "transverse-ising", "j": 1, "field": 1, "length": 12, "boundary": "periodic"}}}"#,
    );
    let (code, _, err) = run(&["jw-check", "--config", &cfg]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn failing_invariant_exits_with_one() {
    // e^{λ r} at λ = P/2 has infinite variance; the plain mean misses the oracle badly at large x
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file(
        dir.path(),
        "c.json",
        r#"{"params": {"pressure": 2.0, "lambdas": [1.0], "xs": [20], "draws": 20000}}"#,
    );
    let (code, _, err) = run(&["toda", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("FAIL deviation_sigma"));
}

#[test]
fn check_mode_prints_summary_only() {
    let (code, out, _) = run(&["formfactor", "--check"]);
    assert_eq!(code, 0);
    assert!(out.contains("periodicity: 4/4 pass"));
    assert!(!out.contains("index,"));
}

#[test]
fn output_directory_and_binary_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_twistlab");
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        // the statistical check may fail for some seeds; the bytes must match regardless
        let run = Command::new(bin).args(["toda", "--seed", "5", "--out"]).arg(&out).output().unwrap();
        assert!(matches!(run.status.code(), Some(0 | 1)));
        files.push(std::fs::read(out.join("toda.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let out = dir.path().join("j");
    let status = Command::new(bin).args(["ed", "--format", "json", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("ed.json")).unwrap();
    let recs: Vec<ResultRecord> = serde_json::from_str(&text).unwrap();
    assert_eq!(recs.len(), 2);
}

#[test]
fn subcommand_and_config_must_agree() {
    assert!(RunConfig::from_json(r#"{"experiment": "toda"}"#, Some(ExperimentKind::Fcs)).is_err());
    assert!(RunConfig::from_json(r#"{}"#, None).is_err());
    let c = RunConfig::from_json(r#"{"experiment": "cft-fit", "seed": 3}"#, None).unwrap();
    assert_eq!(c.experiment(), ExperimentKind::CftFit);
    assert_eq!(c.seed, 3);
}
