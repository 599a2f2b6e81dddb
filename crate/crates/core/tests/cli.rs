//! End-to-end runs of the `wcls` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};
use wcls::config::{EstimateConfig, SimulateConfig};
use wcls::inference::{infer_coefficients, Contrast, InferenceOptions};

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn wcls(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wcls")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run_in(dir: &Path, sub: &str, config: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    wcls(&args).0
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn estimate_writes_one_row_per_contrast() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(dir.path(), "estimate", &examples().join("estimate.toml"), &[]),
        0
    );
    let csv = read(dir.path(), "report.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "analysis,contrast,row,estimate,se,df,ci_lower,ci_upper,p_value"
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    let labels: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(
        labels,
        [
            ("proximal", "increase"),
            ("proximal", "no increase"),
            ("proximal", "any effect"),
            ("proximal", "any effect"),
            ("delayed", "1"),
        ]
    );
    for r in &rows {
        let v: Vec<f64> = r[3..].iter().map(|x| x.parse().unwrap()).collect();
        let (est, se, df, lo, hi, p) = (v[0], v[1], v[2], v[3], v[4], v[5]);
        let crit = StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975);
        assert!((lo - (est - crit * se)).abs() < 1e-9);
        assert!((hi - (est + crit * se)).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&p));
    }
    // 28 people, p = 2 and q = 4 for the proximal analysis.
    assert_eq!(rows[0][5], "22");

    let text = read(dir.path(), "report.txt");
    assert!(text.contains("joint test"));
    assert!(text.contains("denominator: logistic (estimated)"));
    let diagnostics: serde_json::Value = serde_json::from_str(&read(dir.path(), "diagnostics.json")).unwrap();
    assert_eq!(diagnostics["analyses"].as_array().unwrap().len(), 2);
    assert!(
        diagnostics["analyses"][0]["diagnostics"]["weights"]["min"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}

#[test]
fn one_sided_flag_moves_the_quantile() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = examples().join("estimate.toml");
    assert_eq!(run_in(a.path(), "estimate", &cfg, &[]), 0);
    assert_eq!(run_in(b.path(), "estimate", &cfg, &["--one-sided"]), 0);
    let first = |dir: &Path| -> Vec<f64> {
        read(dir, "report.csv")
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .skip(3)
            .map(|x| x.parse().unwrap())
            .collect()
    };
    let (two, one) = (first(a.path()), first(b.path()));
    assert_eq!(two[0], one[0]);
    assert!(one[4] - one[3] < two[4] - two[3]);
}

#[test]
fn estimate_is_repeatable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = examples().join("estimate.toml");
    assert_eq!(run_in(a.path(), "estimate", &cfg, &["--seed", "3"]), 0);
    assert_eq!(run_in(b.path(), "estimate", &cfg, &["--seed", "3"]), 0);
    for name in ["report.csv", "report.txt"] {
        assert_eq!(read(a.path(), name), read(b.path(), name));
    }
}

fn config_with(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let src = edit(fs::read_to_string(examples().join("estimate.toml")).unwrap());
    let src = src.replace(
        "input = \"smoking.csv\"",
        &format!("input = {:?}", examples().join("smoking.csv")),
    );
    let path = dir.join("config.toml");
    fs::write(&path, src).unwrap();
    path
}

#[test]
fn missing_column_is_a_module_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_with(dir.path(), |s| s.replace("\"urge\"", "\"craving\""));
    let out = dir.path().join("out");
    assert_eq!(run_in(&out, "estimate", &cfg, &[]), 1);
    let record: serde_json::Value = serde_json::from_str(&read(&out, "error.json")).unwrap();
    assert_eq!(record["code"], "missing_column");
    assert!(record["message"].as_str().unwrap().contains("craving"));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_with(dir.path(), |s| s.replace("alpha0 = 0.05", "alpha0 = \"five\""));
    assert_eq!(run_in(&dir.path().join("out"), "estimate", &cfg, &[]), 2);
    let cfg = config_with(dir.path(), |s| s.replace("[columns]", "[columns"));
    assert_eq!(run_in(&dir.path().join("out"), "estimate", &cfg, &[]), 2);
    assert_eq!(wcls(&["estimate", "--out", "x"]).0, 2);
}

#[test]
fn example_configs_round_trip() {
    let parsed = EstimateConfig::from_toml(&fs::read_to_string(examples().join("estimate.toml")).unwrap()).unwrap();
    assert_eq!(EstimateConfig::from_toml(&parsed.to_toml()).unwrap(), parsed);
    for name in ["table1", "table2", "table3", "appendixD", "custom"] {
        let src = fs::read_to_string(examples().join(format!("{name}.toml"))).unwrap();
        let parsed = SimulateConfig::from_toml(&src).unwrap();
        assert_eq!(SimulateConfig::from_toml(&parsed.to_toml()).unwrap(), parsed, "{name}");
    }
}

#[test]
fn table3_preset_layout_and_reproducibility() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = examples().join("table3.toml");
    let flags = ["--replicates", "20", "--seed", "9"];
    assert_eq!(run_in(a.path(), "simulate", &cfg, &flags), 0);
    assert_eq!(
        run_in(b.path(), "simulate", &cfg, &[&flags[..], &["--threads", "2"]].concat()),
        0
    );
    for name in ["replication.csv", "replication.txt", "replication.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    let csv = read(a.path(), "replication.csv");
    let analyses: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap()).collect();
    assert_eq!(analyses, ["wcls-ind", "gee-ar1-centered"]);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for col in ["mean", "sd", "rmse", "cp"] {
        assert!(header.contains(&col));
    }
}

#[test]
fn single_replicate_has_undefined_sd() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = examples().join("table3.toml");
    assert_eq!(run_in(dir.path(), "simulate", &cfg, &["--replicates", "1"]), 0);
    let csv = read(dir.path(), "replication.csv");
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let (sd, cp) = (
        header.iter().position(|c| *c == "sd").unwrap(),
        header.iter().position(|c| *c == "cp").unwrap(),
    );
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[sd], "NA");
        let cp: f64 = fields[cp].parse().unwrap();
        assert!(cp == 0.0 || cp == 1.0);
    }
    assert!(read(dir.path(), "replication.txt").contains("NA"));
}

#[test]
fn table1_override_gives_one_group() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t1.toml");
    fs::write(&cfg, "preset = \"table1\"\nreplicates = 3\n[overrides]\nbeta11 = 0.5\n").unwrap();
    assert_eq!(run_in(&dir.path().join("out"), "simulate", &cfg, &[]), 0);
    let csv = read(&dir.path().join("out"), "replication.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[4] == "0.5"));
    let names: Vec<&str> = rows.iter().map(|r| r[6]).collect();
    assert_eq!(names, ["wcls", "gee-ind", "gee-ar1"]);
}

#[test]
fn bad_simulation_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "preset = \"table9\"\n").unwrap();
    assert_eq!(run_in(&dir.path().join("out"), "simulate", &cfg, &[]), 2);
    assert_eq!(
        run_in(
            &dir.path().join("out"),
            "simulate",
            &examples().join("table3.toml"),
            &["--threads", "0"]
        ),
        2
    );
}

/// An estimate of -2.80 with SE 1.29 at the degrees of freedom of a small
/// study prints as (-5.45, -0.15).
#[test]
fn interval_format_contract() {
    for df in [26usize, 27] {
        let q = 1;
        let n = df + 1 + q;
        let res = infer_coefficients(
            &DVector::from_vec(vec![-2.80]),
            &DMatrix::from_element(1, 1, 1.29 * 1.29),
            n,
            q,
            &Contrast::coefficient(0, 1),
            InferenceOptions::default(),
        )
        .unwrap();
        let r = &res.rows[0];
        assert_eq!(r.df, df);
        assert_eq!(format!("({:.2}, {:.2})", r.ci_lower, r.ci_upper), "(-5.45, -0.15)");
        let crit = (r.ci_upper - r.estimate) / r.se;
        assert!((r.estimate - crit * r.se - r.ci_lower).abs() < 1e-12);
    }
}
