use std::path::PathBuf;
use std::process::{Command, Output};

fn dle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dle")).args(args).output().expect("run dle")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dle-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn double_negation_introduction_derives() {
    let o = dle(&["derive", "ortho", "p => not(not(p))"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn exchange_refuted_and_countermodel_replays() {
    let cm = scratch("cm.json");
    let o = dle(&["decide", "fl-base", "F.circ(p,q) => circ(q,p)", "--countermodel", cm.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(cm.exists());
    let e = dle(&["eval", cm.to_str().unwrap()]);
    assert_eq!(code(&e), 1);
    assert!(stdout(&e).ends_with("false\n"));
}

#[test]
fn commutativity_classifies() {
    let o = dle(&["classify", "circ(p,q) <= circ(q,p)", "--sig", "fl"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("epsilon = (p:1, q:1)"));
    assert_eq!(code(&dle(&["classify", "box(dia(p)) <= dia(box(p))", "--sig", "modal-epistemic"])), 1);
}

#[test]
fn exit_codes_for_unsupported_and_usage_errors() {
    assert_eq!(code(&dle(&["decide", "fl-base+contraction", "p => p"])), 2);
    assert_eq!(code(&dle(&["derive", "no-such-logic", "p => p"])), 3);
    assert_eq!(code(&dle(&["derive", "fl", "p =>"])), 3);
    assert_eq!(code(&dle(&["frobnicate"])), 3);
    assert_eq!(code(&dle(&["derive", "--budget", "1", "lattice", "p & q => q | p"])), 2);
}

#[test]
fn rules_listing_ends_with_cut() {
    let o = dle(&["rules", "fl"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("assoc"));
    assert!(text.lines().rev().nth(1).unwrap().starts_with("Cut"));
    assert!(text.ends_with("certificate: ComplexityNonIncreasing\n"));
}

#[test]
fn check_rule_names_failed_condition() {
    let f = scratch("rules.json");
    std::fs::write(
        &f,
        r#"[{"name": "dup", "premises": ["X1 => Y1"], "conclusion": "F.circ(X1, X1) => Y1"},
            {"name": "exchange", "premises": ["F.circ(X1, X2) => Y1"], "conclusion": "F.circ(X2, X1) => Y1"}]"#,
    )
    .unwrap();
    let o = dle(&["check-rule", f.to_str().unwrap(), "--sig", "fl-base"]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("rule dup: REJECTED"));
    assert!(text.contains("C3: FAIL"));
    assert!(text.contains("rule exchange: analytic"));
}

#[test]
fn extra_rules_extend_a_bundle() {
    let f = scratch("exchange.json");
    std::fs::write(
        &f,
        r#"[{"name": "ex", "premises": ["F.circ(X1, X2) => Y1"], "conclusion": "F.circ(X2, X1) => Y1"}]"#,
    )
    .unwrap();
    let o = dle(&["--rules", f.to_str().unwrap(), "derive", "fl-base", "circ(p, q) => circ(q, p)"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn lattice_of_a_diagonal_polarity() {
    let f = scratch("pol.json");
    std::fs::write(&f, r#"{"W": ["a", "b"], "U": ["x", "y"], "N": [[0, 0], [1, 1]]}"#).unwrap();
    let o = dle(&["lattice", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("4 stable sets\n"));
    assert!(text.contains("{a} | {x}"));
}

#[test]
fn sequential_jobs_give_the_same_answer() {
    let a = dle(&["--jobs", "1", "decide", "ortho", "p & (q | r) => (p & q) | (p & r)"]);
    let b = dle(&["decide", "ortho", "p & (q | r) => (p & q) | (p & r)"]);
    assert_eq!(code(&a), 1);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn quick_selftest_passes() {
    let o = dle(&["selftest", "--quick"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("criterion")).count(), 9);
}
