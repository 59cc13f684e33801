//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use dle_core::selftest::{self, Config};

fn main() {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    println!(
        "limits: axiom {:?}, cut elimination {:?}/calculus, decide {:?}/goal, classify {:?}, ortho {:?}, rule check <= {} elements",
        selftest::AXIOM_LIMIT,
        selftest::CUT_ELIM_LIMIT,
        selftest::DECIDE_LIMIT,
        selftest::CLASSIFY_LIMIT,
        selftest::ORTHO_LIMIT,
        selftest::RULE_CHECK_ELEMENTS
    );
    let outcomes = selftest::run_all(&Config::default());
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
