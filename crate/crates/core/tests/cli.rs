use std::path::Path;
use std::process::{Command, Output};

use pluriform::verify::VerifyReport;

fn pluriform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pluriform"))
        .args(args)
        .env_remove("PLURIFORM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn systems_lists_symmetry_counts() {
    let o = pluriform(&["systems"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for s in ["kepler (m=1)", "toda (m=2)", "harmonic (m=1)"] {
        assert!(text.contains(s));
    }
    let a = pluriform(&["systems", "--json"]);
    assert_eq!(a.stdout, pluriform(&["systems", "--json"]).stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v[2]["name"], "toda");
    assert_eq!(v[2]["symmetries"], 2);
}

#[test]
fn verify_toda_symmetry() {
    let o = pluriform(&["verify", "toda", "--n", "4", "--checks", "symmetry"]);
    assert_eq!(o.status.code(), Some(0));
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.checks.len(), 1);
    assert_eq!(r.checks[0].samples, 100);
    assert!(r.checks[0].max_residual < 1e-10);
}

#[test]
fn verify_kepler_commutator_is_informational() {
    let o = pluriform(&["verify", "kepler", "--checks", "commutator"]);
    assert_eq!(o.status.code(), Some(0));
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    let c = &r.checks[0];
    assert!(c.informational);
    assert!(c.constants["fraction_above_floor"] > 0.9);
}

#[test]
fn verify_toda_offshell2_records_constant() {
    let o = pluriform(&["verify", "toda", "--checks", "offshell2"]);
    assert_eq!(o.status.code(), Some(0));
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r.checks[0].pass);
    assert!(r.checks[0].constants.contains_key("c_12"));
}

#[test]
fn failing_check_exits_one() {
    let o = pluriform(&[
        "verify",
        "toda",
        "--checks",
        "symmetry",
        "--identity-tol",
        "1e-300",
        "--count",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["verify", "toda", "--checks", "nonsense"][..],
        &["verify", "toda", "--count", "0"],
        &["verify", "toda", "--bracket-tol", "-1"],
        &["verify", "--config", "/nonexistent/config.json"],
        &["integrate", "toda", "--path", "t1:abc"],
        &["commute", "toda", "--k", "t7"],
        &["loop", "toda", "--sides", "0.2"],
        &[],
    ] {
        let o = pluriform(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"system": {"name": "toda", "n": 5}, "sampling": {"count": 4, "seed": 9}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = pluriform(&["verify", "--config", cfg, "--checks", "symmetry"]);
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((r.seed, r.count), (9, 4));
    assert_eq!(r.system, "toda-periodic");
    let o = pluriform(&[
        "verify", "harmonic", "--config", cfg, "--checks", "symmetry", "--seed", "5",
    ]);
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((r.system.as_str(), r.seed, r.count), ("harmonic", 5, 4));
}

#[test]
fn seed_comes_from_environment_by_default() {
    let o = Command::new(env!("CARGO_BIN_EXE_pluriform"))
        .args(["verify", "toda", "--checks", "symmetry", "--count", "2"])
        .env("PLURIFORM_SEED", "4242")
        .output()
        .unwrap();
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.seed, 4242);
    let o = Command::new(env!("CARGO_BIN_EXE_pluriform"))
        .args(["verify", "toda", "--checks", "symmetry", "--count", "2", "--seed", "1"])
        .env("PLURIFORM_SEED", "4242")
        .output()
        .unwrap();
    let r: VerifyReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.seed, 1);
}

#[test]
fn verify_output_is_byte_identical() {
    let args = ["verify", "kepler", "--count", "20", "--seed", "77"];
    let a = pluriform(&args);
    let b = pluriform(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn integrate_writes_full_precision_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = pluriform(&[
        "integrate",
        "toda",
        "--path",
        "t:0.01,t2:-0.005",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "step,t0,t1,t2,x_1,x_2,x_3,x_4,p_1,p_2,p_3,p_4,H,H_1,H_2");
    let r = rows(&text);
    assert_eq!(r.len(), 1 + 10 + 5);
    let last = r.last().unwrap();
    assert_eq!((last[1], last[2], last[3]), (0.01, 0.0, -0.005));
    // 17 significant digits per value.
    let field = text.lines().nth(1).unwrap().split(',').nth(4).unwrap();
    assert_eq!(field.split('e').next().unwrap().trim_start_matches('-').len(), 18);
}

#[test]
fn integrate_zero_length_path_is_single_row() {
    let o = pluriform(&["integrate", "harmonic", "--path", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&stdout(&o)).len(), 1);
}

#[test]
fn toda_energy_drift_over_ten_time_units() {
    let o = pluriform(&["integrate", "toda", "--path", "t:10"]);
    let r = rows(&stdout(&o));
    let h0 = r[0][12];
    let drift = r.iter().map(|row| (row[12] - h0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-9, "{drift}");
}

#[test]
fn reversed_path_returns_to_start() {
    let fwd = pluriform(&[
        "integrate",
        "toda",
        "--path",
        "t:1.0,t1:0.5,t2:-0.25",
        "--x0",
        "0.1,0.2,-0.3,0.4",
    ]);
    let r = rows(&stdout(&fwd));
    let end = r.last().unwrap();
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
    let x0 = join(&end[4..8]);
    let p0 = join(&end[8..12]);
    let back = pluriform(&[
        "integrate",
        "toda",
        "--path",
        "t2:0.25,t1:-0.5,t:-1.0",
        "--x0",
        &x0,
        "--p0",
        &p0,
    ]);
    let b = rows(&stdout(&back));
    let last = b.last().unwrap();
    for i in 4..12 {
        assert!((last[i] - r[0][i]).abs() < 1e-9, "{i}");
    }
}

#[test]
fn integrate_json_format() {
    let o = pluriform(&["integrate", "harmonic", "--path", "t:0.01", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 11);
}

#[test]
fn loop_reports() {
    let o = pluriform(&["loop", "toda", "--plane", "t1,t2", "--sides", "0.2,0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["deviation"].as_f64().unwrap() < 1e-6);
    let z = pluriform(&["loop", "toda", "--sides", "0,0.2"]);
    let v: serde_json::Value = serde_json::from_slice(&z.stdout).unwrap();
    assert_eq!(v["defect"].as_f64().unwrap(), 0.0);
}

#[test]
fn commute_prints_ratio_table() {
    let o = pluriform(&["commute", "toda", "--k", "t1", "--l", "t2", "--delta", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(table.lines().count(), 4);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in &v["rows"].as_array().unwrap()[1..] {
        let q = row["ratio"].as_f64().unwrap();
        assert!((12.0..=20.0).contains(&q), "{q}");
    }
}

#[test]
fn written_reports_match_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let args = ["verify", "harmonic", "--count", "5"];
    let direct = pluriform(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["-o", out.to_str().unwrap()]);
    assert_eq!(pluriform(&with_out).status.code(), Some(0));
    assert_eq!(std::fs::read(Path::new(&out)).unwrap(), direct.stdout);
}
