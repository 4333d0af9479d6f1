//! End-to-end runs of the `icepath` binary.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn icepath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icepath"))
        .args(args)
        .env_remove("ICEPATH_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_for_every_subcommand() {
    let top = icepath(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    for (sub, flags) in [
        ("generate", &["--scenario", "--n", "--seed", "--out"][..]),
        ("oracle", &["--scenario", "--fix", "--oracle-n", "--seed"]),
        ("estimate", &["--data", "--estimator", "--m", "--seed"]),
        ("simulate", &["--config", "--out-dir"]),
        ("graph", &["--structure", "--periods", "--check-exchangeability"]),
    ] {
        let o = icepath(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let text = stdout(&o);
        for f in flags {
            assert!(text.contains(f), "{sub} help lacks {f}");
        }
        assert!(text.contains("--threads"), "{sub} help lacks --threads");
    }
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(icepath(&["generate", "--bogus"]).status.code(), Some(1));
    assert_eq!(icepath(&["graph", "--structure", "sideways"]).status.code(), Some(1));
    assert_eq!(
        icepath(&["estimate", "--data", "/nonexistent.csv", "--estimator", "naive"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        icepath(&["estimate", "--data", "x.csv", "--estimator", "mle"])
            .status
            .code(),
        Some(1)
    );
    let o = icepath(&["oracle", "--scenario", "d-first", "--seed", "1", "--fix", "sometimes"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--fix"));
}

#[test]
fn generate_then_estimate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (f, threads) in [(&a, "1"), (&b, "3")] {
        let o = icepath(&[
            "--threads",
            threads,
            "generate",
            "--scenario",
            "r-first",
            "--n",
            "800",
            "--seed",
            "21",
            "--out",
            path(f),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let header = std::fs::read_to_string(&a).unwrap();
    assert!(header.starts_with("l0,a,l1,d1,r1,l2,d2,r2,y\n"));

    for est in ["naive", "ipw-r-first", "mi-r-first"] {
        let run = || icepath(&["estimate", "--data", path(&a), "--estimator", est, "--seed", "5"]);
        let (x, y) = (run(), run());
        assert_eq!(x.status.code(), Some(0), "{}", String::from_utf8_lossy(&x.stderr));
        assert_eq!(x.stdout, y.stdout);
        let v: serde_json::Value = serde_json::from_slice(&x.stdout).unwrap();
        assert_eq!(v["estimator"], est);
        assert!(v["point"].as_f64().unwrap().is_finite());
    }
    // MI without a seed is refused
    assert_eq!(
        icepath(&["estimate", "--data", path(&a), "--estimator", "mi-r-first"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn naive_equals_treatment_policy_without_rescue() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.csv");
    assert!(icepath(&[
        "generate",
        "--scenario",
        "independent",
        "--n",
        "500",
        "--seed",
        "3",
        "--out",
        path(&f)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&f).unwrap();
    let mut rows = text.lines();
    let mut zeroed = vec![rows.next().unwrap().to_string()];
    for line in rows {
        let mut cells: Vec<&str> = line.split(',').collect();
        cells[4] = "0";
        cells[7] = "0";
        zeroed.push(cells.join(","));
    }
    std::fs::write(&f, zeroed.join("\n") + "\n").unwrap();

    let point = |est: &str| {
        let o = icepath(&["estimate", "--data", path(&f), "--estimator", est]);
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["point"].as_f64().unwrap()
    };
    assert_eq!(point("naive"), point("treatment-policy"));
}

#[test]
fn graph_lists_adjustment_sets() {
    let o = icepath(&["graph", "--structure", "d-first", "--periods", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("R2 model covariates")).unwrap();
    let inner = &line[line.find('{').unwrap() + 1..line.find('}').unwrap()];
    let set: BTreeSet<&str> = inner.split(',').collect();
    assert_eq!(set, BTreeSet::from(["A", "L0", "L1", "L2", "D1", "D2"]));
    assert!(text.contains("L0 -> L1"));
}

#[test]
fn oracle_prints_truth_json() {
    let o = icepath(&[
        "oracle",
        "--scenario",
        "independent",
        "--fix",
        "r",
        "--oracle-n",
        "1000000",
        "--seed",
        "7",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let tau = v["tau"].as_f64().unwrap();
    let se = v["mc_se"].as_f64().unwrap();
    assert!(se > 0.0 && se < 0.01);
    assert!(tau.is_finite());
}

#[test]
fn simulate_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    std::fs::write(
        &config,
        r#"{"scenarios":["d-first"],"n":300,"reps":4,"estimators":["naive","ipw-d-first"],"oracle_n":20000,"master_seed":9}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = icepath(&["simulate", "--config", path(&config), "--out-dir", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reps = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    assert!(reps.starts_with("scenario,estimator,rep,estimate,failed,reason\n"));
    assert_eq!(reps.lines().count(), 1 + 2 * 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let rows = summary.as_array().expect("summary is an array of rows");
    assert_eq!(rows.len(), 2);
    for key in [
        "scenario",
        "estimator",
        "truth",
        "truth_mc_se",
        "mean",
        "bias",
        "mc_se",
        "sd",
        "mse",
        "q025",
        "q25",
        "q50",
        "q75",
        "q975",
        "failures",
    ] {
        assert!(rows[0].get(key).is_some(), "missing {key}");
    }

    // an unknown estimator name is a validation error
    std::fs::write(
        &config,
        r#"{"scenarios":["d-first"],"estimators":["ipw-sideways"],"master_seed":1}"#,
    )
    .unwrap();
    let o = icepath(&["simulate", "--config", path(&config), "--out-dir", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn one_visit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("s.csv");
    assert!(icepath(&[
        "generate",
        "--single-period",
        "--n",
        "3000",
        "--seed",
        "4",
        "--out",
        path(&f)
    ])
    .status
    .success());
    let o = icepath(&["estimate", "--data", path(&f), "--estimator", "crossworld"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = icepath(&["estimate", "--data", path(&f), "--estimator", "naive"]);
    assert_eq!(o.status.code(), Some(1));
}
