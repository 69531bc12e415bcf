use std::io::Write;
use std::process::{Command, Output};

fn laclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laclab"))
        .args(args)
        .env_remove("LACLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn gen_prints_terms() {
    let out = laclab(&["gen", "--kind", "geometric", "--theta", "2", "--n", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], "2");
    assert_eq!(lines[9], "1024");
}

#[test]
fn disc_reports_both_discrepancies() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "0.1\n0.4\n0.7").unwrap();
    let out = laclab(&["disc", "--points", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    // D* is 1 - 0.7 at the right end; D adds the 0.1 excess below 0.1.
    assert!((r["results"]["D_star_N"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert!((r["results"]["D_N"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(r["command"], "disc");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["version"].is_string());
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["clt", "--theta", "2", "--N", "512", "--M", "2000", "--seed", "7"];
    let a = laclab(&args);
    let b = laclab(&args);
    assert!(matches!(a.status.code(), Some(0 | 2)));
    assert_eq!(a.stdout, b.stdout);
    let r = report(&a);
    assert_eq!(r["config"]["N"], 512);
    assert_eq!(r["config"]["theta"], 2);
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["kdist", "--N", "64", "--M", "500"];
    let one = laclab(&[&base[..], &["--threads", "1"]].concat());
    let four = laclab(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one.stdout, four.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_laclab"))
        .args(base)
        .env("LACLAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(one.stdout, env.stdout);
}

#[test]
fn config_errors_exit_one() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "{{\n  \"N\": 64,\n  \"colour\": \"red\"\n}}").unwrap();
    let out = laclab(&["clt", "--config", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("colour"), "{err}");

    let out = laclab(&["clt", "--N", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    assert_eq!(laclab(&["nonsense"]).status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "{{\"a\": 3, \"s\": 0.25, \"t\": 0.75}}").unwrap();
    let out = laclab(&["gamma", "--config", f.path().to_str().unwrap(), "--a", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["config"]["a"], 2);
    assert_eq!(r["config"]["s"], 0.25);
}

#[test]
fn failing_assertion_exits_two() {
    // With one term the sum is √2·cos 2πx, an arcsine law, not a normal one.
    let out = laclab(&["clt", "--N", "1", "--M", "20000", "--theta", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["pass"], false);
}

#[test]
fn csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lil.csv");
    let out = laclab(&["lil-trace", "--N", "64", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.lines().any(|l| l == "N,S_N,normalized,discrepancy_lil"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);
}
