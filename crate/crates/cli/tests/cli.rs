use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn gmsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmsc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim_end().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn accepts_reports_the_accepting_round() {
    let o = gmsc(&[
        "accepts",
        "--machine",
        p(&data("reach.gmsc")),
        "--graph",
        p(&data("path2.json")),
        "--node",
        "w",
        "--classifier",
        "standard",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "accept at round 1");
}

#[test]
fn rejection_exits_with_one() {
    let o = gmsc(&[
        "accepts",
        "--machine",
        p(&data("centre.gmsc")),
        "--graph",
        p(&data("path2.json")),
        "--node",
        "w",
        "--classifier",
        "buchi",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout(&o), "reject");
}

#[test]
fn float_addition_rounds() {
    let o = gmsc(&["float", "--system", "p=3,n=2,beta=10", "--add", "0.312", "0.743"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "1.06");
}

#[test]
fn float_bound_and_sum_file() {
    let o = gmsc(&["float", "--system", "p=1,n=1,beta=2", "--bound"]);
    assert_eq!(stdout(&o), "5");
    let o = gmsc(&["float", "--system", "p=2,n=1,beta=10", "--sum-file", p(&data("sum.txt"))]);
    assert_eq!(stdout(&o), "2");
    let o = gmsc(&["float", "--system", "p=1,n=1,beta=10", "--add", "0.25", "1"]);
    assert_eq!(code(&o), 2, "0.25 is not representable with one digit");
}

#[test]
fn translated_automaton_is_equivalent_to_its_program() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("reach.fcmpa.json");
    let o = gmsc(&["translate", "--from", "gmsc", "--to", "fcmpa", p(&data("reach.gmsc")), "-o", p(&fa)]);
    assert_eq!(code(&o), 0);
    let o = gmsc(&["check-equiv", "--a", p(&data("reach.gmsc")), "--b", p(&fa), "--exhaustive", "3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("12420 pointed graphs"));
}

#[test]
fn counterexamples_are_loadable_graphs() {
    let o = gmsc(&[
        "--json",
        "check-equiv",
        "--a",
        p(&data("reach.gmsc")),
        "--b",
        p(&data("centre.gmsc")),
        "--exhaustive",
        "3",
    ]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["equivalent"], false);
    let cex = &report["counterexamples"][0];
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("cex.json");
    std::fs::write(&g, cex["graph"].to_string()).unwrap();
    let node = cex["point"].as_str().unwrap();
    let verdict = |m: &str| code(&gmsc(&["accepts", "--machine", p(&data(m)), "--graph", p(&g), "--node", node]));
    assert_ne!(verdict("reach.gmsc"), verdict("centre.gmsc"));
}

#[test]
fn sampled_check_is_deterministic_across_jobs() {
    let run = |jobs: &str| {
        let o = gmsc(&[
            "--json",
            "check-equiv",
            "--a",
            p(&data("reach.gmsc")),
            "--b",
            p(&data("centre.gmsc")),
            "--samples",
            "50",
            "--seed",
            "3",
            "--collect-all",
            "--jobs",
            jobs,
        ]);
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["elapsed_ms"] = Value::Null;
        v
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn network_translation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("reach.gnn.json");
    let o = gmsc(&["translate", "--from", "gmsc", "--to", "rsimple", p(&data("reach.gmsc")), "-o", p(&net)]);
    assert_eq!(code(&o), 0);
    let o = gmsc(&["--json", "accepts", "--machine", p(&net), "--graph", p(&data("path2.json")), "--node", "w"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["accept"], true);
    let o = gmsc(&["check-equiv", "--a", p(&data("reach.gmsc")), "--b", p(&net), "--exhaustive", "2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn automaton_round_trips_to_a_program() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("centre.fcmpa.json");
    let back = dir.path().join("back.gmsc");
    gmsc(&["translate", "--from", "gmsc", "--to", "fcmpa", p(&data("centre.gmsc")), "-o", p(&fa)]);
    let o = gmsc(&["translate", "--from", "fcmpa", "--to", "gmsc", p(&fa), "-o", p(&back)]);
    assert_eq!(code(&o), 0);
    let o = gmsc(&["check-equiv", "--a", p(&data("centre.gmsc")), "--b", p(&back), "--exhaustive", "3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn simulate_golden() {
    let o = gmsc(&["simulate", "--program", p(&data("reach.gmsc")), "--graph", p(&data("path2.json")), "--trace"]);
    assert_eq!(
        stdout(&o),
        "round 0: w={} u={X}*\nround 1: w={X}* u={}\nround 2: w={} u={}\ncycle: round 3 equals round 2 (period 1)"
    );
}

#[test]
fn eval_and_type() {
    let o = gmsc(&["eval", "--formula", "<1> p", "--graph", p(&data("path2.json")), "--node", "w"]);
    assert_eq!((code(&o), stdout(&o)), (0, "true".to_string()));
    let o = gmsc(&["eval", "--formula", "<1> p", "--graph", p(&data("path2.json")), "--node", "u"]);
    assert_eq!((code(&o), stdout(&o)), (1, "false".to_string()));
    let o = gmsc(&["type", "--graph", p(&data("path2.json")), "--node", "w", "--width", "1", "--depth", "2"]);
    assert_eq!(stdout(&o), "{}[1x{p}[]]");
}

#[test]
fn gml_types_of_a_formula() {
    let o = gmsc(&[
        "translate", "--from", "gml", "--to", "gml-types", "--formula", "<1> p", "--pi", "p", "--width", "1", "--depth", "1",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "formula: 4 types\n  {}[1x{} 1x{p}]\n  {}[1x{p}]\n  {p}[1x{} 1x{p}]\n  {p}[1x{p}]");
}

#[test]
fn exit_codes_follow_the_contract() {
    assert_eq!(code(&gmsc(&["bogus"])), 2);
    assert_eq!(code(&gmsc(&["eval", "--formula", "(p &", "--graph", p(&data("path2.json")), "--node", "w"])), 2);
    assert_eq!(
        code(&gmsc(&["accepts", "--machine", p(&data("sum.txt")), "--graph", p(&data("path2.json")), "--node", "w"])),
        2
    );
    let ceiling = gmsc(&[
        "--ceiling",
        "1",
        "simulate",
        "--program",
        p(&data("reach.gmsc")),
        "--graph",
        p(&data("path2.json")),
        "--trace",
    ]);
    assert_eq!(code(&ceiling), 3);
    assert_eq!(code(&gmsc(&["--version"])), 0);
    assert_eq!(code(&gmsc(&["--help"])), 0);
}
