use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nonsing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonsing"))
        .args(args)
        .env_remove("NONSING_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn construct_two_levels() {
    let v = json_of(&nonsing(&["construct", "--levels", "2"]));
    let l2 = &v["levels"][1];
    assert_eq!(l2["n"], "355");
    assert_eq!(l2["N"], "362");
    assert_eq!(l2["k"], 5);
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true)));
}

#[test]
fn classify_measure_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, verdict) in [
        ("step", "ZeroType(SingularToLimitProduct)"),
        ("fair", "EquivalentInvariant"),
        ("alternating", "NotNonsingular"),
        ("no-limit", "ZeroType(NoLimit)"),
    ] {
        let file = path(dir.path(), &format!("{name}.json"));
        assert!(nonsing(&["show-measure", "--measure", name, "--out", &file]).status.success());
        let v = json_of(&nonsing(&["classify", "--measure", &file]));
        assert_eq!(v["verdict"], verdict, "{name}");
    }
}

#[test]
fn levels_file_is_a_measure() {
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "levels.json");
    assert!(nonsing(&["construct", "--levels", "2", "--out", &file]).status.success());
    let from_file = json_of(&nonsing(&["distance", "--measure", &file, "--shift", "3"]));
    let builtin = json_of(&nonsing(&["distance", "--measure", "kosloff:2", "--shift", "3"]));
    assert_eq!(from_file["exact"], builtin["exact"]);
    assert_eq!(from_file["exact"]["kind"], "finite");
}

#[test]
fn require_nonsingular_fails_after_writing() {
    let out = nonsing(&["classify", "--measure", "alternating", "--require-nonsingular"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of_any(&out)["verdict"], "NotNonsingular");
    let ok = nonsing(&["classify", "--measure", "step", "--require-nonsingular"]);
    assert_eq!(ok.status.code(), Some(0));
}

fn json_of_any(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let cases: &[(&[&str], &str)] = &[
        (&["rn-sample", "--measure", "step", "--n", "1", "--window", "5:1", "--seed", "1"], "--window"),
        (&["rn-sample", "--measure", "step", "--n", "1", "--window", "-4:4"], "--seed"),
        (&["classify", "--measure", "nosuch"], "--measure"),
        (&["classify", "--measure", "missing.json"], "--measure"),
        (&["classify", "--measure", "fair", "--format", "csv"], "--format"),
        (&["renewal", "--p", "log", "--N", "10", "--check", "simulate"], "--seed"),
        (&["pwm", "--p", "log", "--N", "10", "--times", "1,0"], "--times"),
        (&["conservativity", "--powers", "1,0", "--N", "10", "--seed", "1"], "--powers"),
        (&["renewal", "--p", "poly", "--N", "10"], "--p"),
        (&["construct", "--levels", "1", "--precision-bits", "8"], "--precision-bits"),
    ];
    for (args, flag) in cases {
        let out = nonsing(args);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {err}");
        assert!(err.contains(flag), "{args:?}: {err}");
    }
}

#[test]
fn domain_errors_exit_1_verbatim() {
    let out = nonsing(&["construct", "--levels", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("level 4: precision exhausted"), "{err}");
    let out = nonsing(&["rn-sample", "--measure", "step", "--n", "0", "--window", "0:1", "--seed", "1", "--count", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_embed_run_config_and_version() {
    let v = json_of(&nonsing(&["classify", "--measure", "fair"]));
    assert_eq!(v["artifact"], "nonsing");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["run_config"]["command"]["subcommand"], "classify");
    assert_eq!(v["run_config"]["precision_bits"], 65536);

    let out = nonsing(&["zero-type-profile", "--measure", "step", "--n", "1:3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# nonsing "));
    assert!(lines[1].starts_with("# run_config {"));
    assert_eq!(lines[2], "n,distance,tail_bound,kind,rho_upper");
    assert_eq!(lines.len(), 6);
}

#[test]
fn precision_env_var() {
    let out = Command::new(env!("CARGO_BIN_EXE_nonsing"))
        .args(["construct", "--levels", "2"])
        .env("NONSING_PRECISION_BITS", "4096")
        .output()
        .unwrap();
    assert_eq!(json_of(&out)["run_config"]["precision_bits"], 4096);
}

#[test]
fn sampling_is_byte_identical() {
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            [
                &["rn-sample", "--measure", "kosloff:2", "--n", "5", "--window", "-400:10", "--seed", "7", "--count", "2000"][..],
                &["rn-sample", "--measure", "step", "--n", "3", "--window", "-20:20", "--seed", "7", "--count", "500", "--format", "csv"],
                &["conservativity", "--powers", "1,2,-3", "--N", "500", "--seed", "2"],
                &["renewal", "--p", "log", "--N", "200", "--check", "simulate", "--seed", "5", "--runs", "2000"],
            ]
            .iter()
            .map(|a| {
                let o = nonsing(a);
                assert!(o.status.success(), "{a:?}");
                o.stdout
            })
            .collect()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let other = nonsing(&["rn-sample", "--measure", "step", "--n", "3", "--window", "-20:20", "--seed", "8", "--count", "500", "--format", "csv"]);
    assert_ne!(other.stdout, runs[0][1]);
}

#[test]
fn renewal_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "p.csv");
    std::fs::write(&file, "0,1\n1,0.5\n10,0.3\n").unwrap();
    let v = json_of(&nonsing(&["renewal", "--p", &format!("table:{file}"), "--N", "100"]));
    assert_eq!(v["tail_class"]["kind"], "custom");
    assert_eq!(v["null_recurrence"]["verdict"], "inconclusive");
}

#[test]
fn renewal_and_pwm_verdicts() {
    let v = json_of(&nonsing(&["renewal", "--p", "log", "--N", "1000"]));
    assert_eq!(v["null_recurrence"]["verdict"], "diverges");
    let v = json_of(&nonsing(&["pwm", "--p", "log", "--times", "1,2,0.5", "--N", "1000"]));
    assert_eq!(v["pwm"]["series"]["verdict"], "diverges");
    let v = json_of(&nonsing(&["pwm", "--p", "geom:0.5", "--times", "-1", "--N", "100"]));
    assert_eq!(v["pwm"]["series"]["verdict"], "converges");
    assert_eq!(v["pwm"]["times"][0], 1.0);
    let v = json_of(&nonsing(&["renewal", "--p", "log", "--N", "300", "--check", "interarrival"]));
    assert!(v["interarrival"]["round_trip_max_error"].as_f64().unwrap() < 1e-12);
    assert!((v["interarrival"]["f_head"][0].as_f64().unwrap() - 0.761462859614660).abs() < 1e-14);
}

#[test]
fn distance_and_affinity_outputs() {
    let v = json_of(&nonsing(&["distance", "--measure", "perturbed", "--other", "fair", "--truncate", "10"]));
    assert!((v["exact"]["value"].as_f64().unwrap() - 0.211145618).abs() < 1e-9);
    assert_eq!(v["truncated"]["N"], 10);
    let v = json_of(&nonsing(&["affinity", "--measure", "step", "--shift", "2"]));
    assert_eq!(v["exact"]["kind"], "positive");
    let v = json_of(&nonsing(&["distance", "--measure", "alternating"]));
    assert_eq!(v["exact"]["kind"], "diverges");
}
