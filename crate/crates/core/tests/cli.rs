use std::path::Path;

use levylab::cli::run;
use levylab::config::Config;
use levylab::report::REPORT_FILE;

fn levylab(args: &[&str]) -> i32 {
    run(std::iter::once("levylab").chain(args.iter().copied()))
}

fn out(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn usage_and_configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    assert_eq!(levylab(&[]), 2);
    assert_eq!(levylab(&["frobnicate"]), 2);
    assert_eq!(levylab(&["sample", "--mu", "abc"]), 2);
    assert_eq!(levylab(&["sample", "--out-dir", d, "--set", "unqualified=1"]), 2);
    assert_eq!(levylab(&["sample", "--out-dir", d, "--set", "sample.colour=red"]), 2);
    assert_eq!(levylab(&["reverse", "--out-dir", d, "--target", "nope"]), 2);
    assert_eq!(levylab(&["sample", "--out-dir", d, "--mu", "2.5"]), 2);
    assert_eq!(levylab(&["sim-langevin", "--out-dir", d, "--config", "/nonexistent.cfg"]), 2);
}

#[test]
fn numerical_failures_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let code = levylab(&[
        "solve-fpe", "--out-dir", d, "--tfinal", "0.1",
        "--set", "fpe.advection=upwind", "--set", "fpe.splitting=strang",
    ]);
    assert_eq!(code, 3);
}

#[test]
fn sample_writes_csv_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(levylab(&["sample", "-n", "5", "--seed", "3", "--out-dir", d.to_str().unwrap()]), 0);
    let csv = out(d, "samples.csv");
    let report = out(d, REPORT_FILE);
    let cfg = Config::parse(&report).unwrap().without_report_sections();
    assert!(csv.starts_with(&format!("# levylab sample config_hash={}\n", cfg.hash())));
    assert!(csv.contains("# columns: x\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert!(!csv.contains('\r'));
    assert_eq!(cfg.get("run.command"), Some("sample"));
    assert!(report.contains("samples.csv sha256:"));
}

#[test]
fn fraclap_output_is_a_gridfunction() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let input = d.join("f.csv");
    let body: String = (0..401).map(|i| {
        let x = -20.0 + 0.1 * i as f64;
        format!("{x},{}\n", 1.0 / (std::f64::consts::PI * (1.0 + x * x)))
    }).collect();
    std::fs::write(&input, format!("# columns: x,f\n{body}")).unwrap();
    let od = d.join("o");
    assert_eq!(levylab(&["fraclap", "--input", input.to_str().unwrap(), "--mu", "1", "--out-dir", od.to_str().unwrap()]), 0);
    let csv = out(&od, "fraclap.csv");
    assert!(csv.starts_with("# gridfunction mu=1 method=pv\n"));
    // power-law tail detected from the edges; local exponent at x = 20 is 1.995
    let report = out(&od, REPORT_FILE);
    let p: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("tail = power:"))
        .expect("power-law tail in report")
        .parse()
        .unwrap();
    assert!((p - 2.0).abs() < 0.02, "tail exponent {p}");
}

#[test]
fn replay_from_report_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["reverse", "--target", "cauchy_alpha4", "--out-dir", a.to_str().unwrap()];
    assert_eq!(levylab(&args), 0);
    let report = a.join(REPORT_FILE);
    assert_eq!(levylab(&["reverse", "--config", report.to_str().unwrap(), "--out-dir", b.to_str().unwrap()]), 0);
    assert_eq!(out(&a, "reverse.csv"), out(&b, "reverse.csv"));
    // the report belongs to one subcommand
    assert_eq!(levylab(&["sample", "--config", report.to_str().unwrap(), "--out-dir", b.to_str().unwrap()]), 2);
}

#[test]
fn flags_override_config_file_and_set_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 8\n[sample]\nn = 4\nmu = 1.5\n").unwrap();
    let d = tmp.path().join("o");
    let code = levylab(&[
        "sample", "--config", cfg.to_str().unwrap(), "-n", "6", "--set", "sample.n=7",
        "--out-dir", d.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let c = Config::parse(&out(&d, REPORT_FILE)).unwrap();
    assert_eq!(c.get("sample.n"), Some("7"));
    assert_eq!(c.get("sample.mu"), Some("1.5"));
    assert_eq!(c.get("run.seed"), Some("8"));
}
