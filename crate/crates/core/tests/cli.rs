use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use collig::rx::RxMeasure;
use serde_json::Value;

fn collig(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_collig"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("COLLIG_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// The report with every wall time zeroed.
fn without_times(mut v: Value) -> Value {
    match &mut v {
        Value::Object(map) => {
            for (k, val) in map.iter_mut() {
                if k == "wall_time_s" {
                    *val = Value::from(0.0);
                } else {
                    *val = without_times(val.take());
                }
            }
        }
        Value::Array(items) => {
            for item in items.iter_mut() {
                *item = without_times(item.take());
            }
        }
        _ => {}
    }
    v
}

#[test]
fn passing_suite_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = collig(
        &[
            "verify",
            "canonical",
            "--trials",
            "3",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["suite"], "canonical");
    assert_eq!(r["pass"], true);
    assert_eq!(r["provenance"]["seed"], 1);
    assert_eq!(r["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    let csv = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("check_id,params,residual,threshold,pass")
    );
    assert_eq!(lines.count(), r["checks"].as_array().unwrap().len());
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = collig(
        &[
            "verify",
            "markov",
            "--quad-order",
            "4",
            "--trials",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 1);
    assert_eq!(report(dir.path())["pass"], false);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL markov.residual_b"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&collig(&["verify", "nonsense", "--out", d], None)), 2);
    assert_eq!(code(&collig(&["verify", "rn", "--bogus"], None)), 2);
    assert_eq!(
        code(&collig(&["verify", "rn", "--n", "0", "--out", d], None)),
        2
    );
    assert_eq!(
        code(&collig(&["verify", "rn", "--tol", "-1", "--out", d], None)),
        2
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"seed": 3, "colour": "blue"}"#).unwrap();
    assert_eq!(
        code(&collig(
            &[
                "verify",
                "rn",
                "--config",
                bad.to_str().unwrap(),
                "--out",
                d
            ],
            None
        )),
        2
    );
    assert_eq!(
        code(&collig(
            &["export-measure", "--kind", "phi", "--b", "0.5", "--out", d],
            None
        )),
        2
    );
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "trials": 2, "m": 4}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = collig(
        &[
            "verify",
            "canonical",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0);
    let r = report(&out_dir);
    assert_eq!(r["provenance"]["seed"], 7);
    assert_eq!(r["config"]["trials"], 2);
    assert_eq!(r["config"]["m"], 4);
    assert_eq!(r["config"]["n"], 1);
    assert_eq!(r["config"]["quad_order"], 40);
}

#[test]
fn reports_replay_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for (i, threads) in ["1", "3", "3"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = collig(
            &[
                "verify",
                "markov",
                "--trials",
                "4",
                "--seed",
                "11",
                "--out",
                out_dir.to_str().unwrap(),
            ],
            Some(threads),
        );
        assert_eq!(code(&out), 0);
        let mut r = without_times(report(&out_dir));
        r["config"]["output_dir"] = Value::Null;
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[1], reports[2]);
}

#[test]
fn exported_xi_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("xi.json");
    let out = collig(
        &[
            "export-measure",
            "--kind",
            "xi",
            "--h",
            "1",
            "--psi",
            "0.7",
            "--out",
            path.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0);
    let mu = RxMeasure::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    assert!((mu.total_mass() - 1.0).abs() < 1e-8);
}

#[test]
fn exported_phi_csv_has_increasing_s() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.csv");
    let out = collig(
        &[
            "export-measure",
            "--kind",
            "phi",
            "--b",
            "2",
            "--M",
            "0.3",
            "--out",
            path.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("kind,s,t,value"));
    let s: Vec<f64> = lines
        .filter(|l| l.starts_with("density"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(s.len() > 100);
    assert!(s.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn exported_fiber_has_density_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fiber.csv");
    let out = collig(
        &[
            "export-measure",
            "--kind",
            "fiber",
            "--seed",
            "4",
            "--m",
            "3",
            "--x",
            "0.3",
            "--u",
            "-0.2",
            "--out",
            path.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&path).unwrap();
    assert!(csv.lines().filter(|l| l.starts_with("density")).count() > 10);

    // m = n: the fiber is a single atom
    let atom = dir.path().join("atom.csv");
    let out = collig(
        &[
            "export-measure",
            "--kind",
            "fiber",
            "--m",
            "1",
            "--out",
            atom.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&atom).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("atom")).count(), 1);
    assert_eq!(csv.lines().filter(|l| l.starts_with("density")).count(), 0);
}

#[test]
fn kernel_export_has_a_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel.csv");
    let out = collig(&["export-kernel", "--out", path.to_str().unwrap()], None);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 1 + 25 * 25);
}
