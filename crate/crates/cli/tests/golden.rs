//! Every command path against a checked-in expected output.
//!
//! Run with `UPDATE_GOLDEN=1` to rewrite the files under `tests/golden/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn ramsey(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ramsey"))
        .args(args)
        .current_dir(dir)
        .env_remove("RAMSEY_ORACLE_LIMIT")
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn check(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {name}"));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

/// Runs a command that must succeed and compares stdout with the golden file.
fn golden(dir: &Path, name: &str, args: &[&str]) -> Value {
    let (code, stdout, stderr) = ramsey(dir, args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
    check(name, &stdout);
    serde_json::from_str(&stdout).unwrap_or(Value::Null)
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    for (file, args) in [
        (
            "vertex.json",
            vec!["--depth", "2", "--arity", "1", "--colors", "2", "--seed", "3"],
        ),
        ("left.json", vec!["--depth", "4", "--scope", "type:la", "--seed", "1"]),
        ("maa.json", vec!["--depth", "4", "--scope", "type:maa", "--seed", "2"]),
        (
            "chains.json",
            vec!["--depth", "4", "--arity", "3", "--scope", "chains", "--seed", "4"],
        ),
        ("all.json", vec!["--depth", "3", "--scope", "all", "--seed", "5"]),
        (
            "cross.json",
            vec!["--depth", "0", "--scope", "cross:3,3", "--seed", "6"],
        ),
        (
            "types2.json",
            vec!["--generator", "type", "--depth", "2", "--colors", "3"],
        ),
    ] {
        let mut full = vec!["colorings", "generate", "-o", file];
        full.extend(args);
        let (code, _, stderr) = ramsey(p, &full);
        assert_eq!(code, 0, "{file}: {stderr}");
    }
    // m = 3 learner for three-point instances: predicts 1 exactly when the query sits below every sample point
    let rows: serde_json::Map<String, Value> = (0..16)
        .map(|t: u32| (format!("{t:04b}"), json!([0.0, 0.0, 0.0, 1.0])))
        .collect();
    let table = json!({ "m": 3, "p": rows });
    fs::write(p.join("table.json"), table.to_string()).unwrap();
    let whole2 = json!({ "depth": 2, "vertices": ["", "0", "1", "00", "01", "10", "11"] });
    fs::write(p.join("whole2.json"), whole2.to_string()).unwrap();
    dir
}

#[test]
fn types_and_bounds() {
    let dir = setup();
    let p = dir.path();
    let count = golden(p, "types_count_m3.json", &["types", "count", "--m", "3"]);
    assert_eq!(count["tau"], 13);
    let all = golden(p, "types_enumerate_m3.json", &["types", "enumerate", "--m", "3"]);
    assert_eq!(all["types"].as_array().unwrap().len(), 13);

    let chains = golden(
        p,
        "bounds_chains.json",
        &["bounds", "--family", "chains", "--d", "2", "--m", "2", "--k", "2"],
    );
    assert_eq!(chains["tower"]["height"], 2);
    golden(
        p,
        "bounds_chains_recursive.json",
        &[
            "bounds",
            "--family",
            "chains-recursive",
            "--d",
            "2",
            "--m",
            "2",
            "--k",
            "2",
        ],
    );
    golden(
        p,
        "bounds_pairs_left.json",
        &["bounds", "--family", "pairs", "--d", "3", "--k", "2", "--scope", "left"],
    );
    golden(
        p,
        "bounds_pairs_all.json",
        &["bounds", "--family", "pairs", "--d", "2", "--k", "2"],
    );
    golden(
        p,
        "bounds_alpha.json",
        &["bounds", "--family", "alpha", "--d", "20", "--k", "2"],
    );
    let sc = golden(
        p,
        "bounds_subtree_count.json",
        &["bounds", "--family", "subtree-count", "--n", "3", "--d", "1"],
    );
    // C(3,2) * 2^(3*2)
    assert_eq!(sc["exact"], "192");
    golden(
        p,
        "bounds_subtree_count_levels.json",
        &[
            "bounds",
            "--family",
            "subtree-count",
            "--n",
            "3",
            "--d",
            "1",
            "--levels",
        ],
    );
    golden(
        p,
        "bounds_privacy.json",
        &["bounds", "--family", "privacy", "--n", "1000", "--m", "1"],
    );
}

#[test]
fn colorings_and_pigeonhole() {
    let dir = setup();
    let p = dir.path();
    golden(
        p,
        "colorings_generate.json",
        &[
            "colorings",
            "generate",
            "--depth",
            "2",
            "--arity",
            "1",
            "--colors",
            "2",
            "--seed",
            "3",
        ],
    );
    golden(
        p,
        "colorings_generate_tabulated.json",
        &[
            "colorings",
            "generate",
            "--depth",
            "2",
            "--arity",
            "1",
            "--colors",
            "2",
            "--seed",
            "3",
            "--tabulate",
        ],
    );
    let info = golden(
        p,
        "colorings_inspect.json",
        &["colorings", "inspect", "--coloring", "left.json"],
    );
    // left pairs of a depth-4 tree: every vertex with each of its left descendants
    let left_pairs: u64 = (0..=4u32).map(|d| (1u64 << d) * ((1u64 << (4 - d)) - 1)).sum();
    let hist: u64 = info["histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(hist, left_pairs);

    let php = golden(p, "php.json", &["php", "--coloring", "vertex.json", "--budgets", "1,1"]);
    assert!(php["embedding"]["vertices"].is_array());
}

#[test]
fn finders_and_verify() {
    let dir = setup();
    let p = dir.path();
    for (name, coloring, target) in [
        ("find_pairs_comparable", "left.json", "pairs-comparable"),
        ("find_pairs_incomparable", "maa.json", "pairs-incomparable"),
        ("find_chains", "chains.json", "chains"),
        ("find_msubsets", "all.json", "msubsets"),
        ("find_bipartite", "cross.json", "bipartite"),
    ] {
        for strategy in ["constructive", "oracle"] {
            let file = format!("{name}_{strategy}.json");
            let result = golden(
                p,
                &file,
                &[
                    "find",
                    "--coloring",
                    coloring,
                    "--target",
                    target,
                    "--strategy",
                    strategy,
                ],
            );
            fs::write(p.join(&file), result.to_string()).unwrap();
            let v = golden(
                p,
                &format!("verify_{name}_{strategy}.json"),
                &["verify", "--embedding", &file, "--coloring", coloring],
            );
            assert_eq!(v["pass"], true, "{file}");
        }
    }

    let v = golden(
        p,
        "verify_type_coloring_whole.json",
        &[
            "verify",
            "--embedding",
            "whole2.json",
            "--coloring",
            "types2.json",
            "--predicate",
            "type-monochromatic",
        ],
    );
    assert_eq!(v["pass"], true);

    let (code, stdout, _) = ramsey(
        p,
        &["verify", "--embedding", "whole2.json", "--coloring", "types2.json"],
    );
    assert_eq!(code, 1);
    check("verify_mutated.json", &stdout);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert!(v["violation"]["subset"].is_array());
}

#[test]
fn privacy_lab() {
    let dir = setup();
    let p = dir.path();
    let r = golden(
        p,
        "privacy_reduce.json",
        &[
            "privacy",
            "reduce",
            "--depth",
            "256",
            "--points",
            "5,70,140",
            "--trials",
            "8",
            "--seed",
            "7",
            "--threads",
            "2",
        ],
    );
    assert_eq!(r["outputs"].as_array().unwrap().len(), 8);
    let (code, csv, _) = ramsey(
        p,
        &[
            "privacy", "reduce", "--depth", "256", "--points", "5,70,140", "--trials", "8", "--seed", "7", "--format",
            "csv",
        ],
    );
    assert_eq!(code, 0);
    check("privacy_reduce.csv", &csv);
    golden(
        p,
        "privacy_reduce_table.json",
        &[
            "privacy",
            "reduce",
            "--depth",
            "256",
            "--points",
            "5,70,140",
            "--trials",
            "3",
            "--learner",
            "table:table.json",
        ],
    );
    let cb = golden(
        p,
        "privacy_check_cb.json",
        &["privacy", "check-cb", "--depth", "3", "--m", "1"],
    );
    assert_eq!(cb["comparison_based"], true);
    golden(
        p,
        "privacy_check_cb_parity.json",
        &["privacy", "check-cb", "--learner", "parity", "--depth", "3", "--m", "1"],
    );
    golden(
        p,
        "privacy_build_coloring.json",
        &["privacy", "build-coloring", "--depth", "3", "--m", "1"],
    );
}

#[test]
fn exit_codes() {
    let dir = setup();
    let p = dir.path();
    assert_eq!(ramsey(p, &["no-such-command"]).0, 2);
    assert_eq!(ramsey(p, &["find", "--coloring", "left.json"]).0, 2);
    assert_eq!(ramsey(p, &["types", "count", "--m", "3", "--format", "csv"]).0, 2);
    assert_eq!(
        ramsey(p, &["colorings", "generate", "--depth", "2", "--scope", "sideways"]).0,
        2
    );
    // domain errors: points too close together, a chain finder on incomparable pairs, a missing file
    assert_eq!(
        ramsey(p, &["privacy", "reduce", "--depth", "64", "--points", "10,12"]).0,
        1
    );
    assert_eq!(
        ramsey(p, &["find", "--coloring", "maa.json", "--target", "chains"]).0,
        1
    );
    assert_eq!(ramsey(p, &["php", "--coloring", "missing.json", "--budgets", "1"]).0, 1);
}

#[test]
fn output_flag_writes_the_same_document() {
    let dir = setup();
    let p = dir.path();
    let (_, stdout, _) = ramsey(p, &["types", "count", "--m", "4"]);
    let (code, _, _) = ramsey(p, &["types", "count", "--m", "4", "-o", "out.json"]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(p.join("out.json")).unwrap(), stdout);
    assert!(stdout.contains("\"schema_version\": 1"));
}
