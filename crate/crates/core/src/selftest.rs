//! The acceptance suite as a library, shared by the test target and the CLI.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundles::{Bundle, NAMES, NON_INDUCTIVE};
use crate::calculus::{check_analytic, Condition, RuleSpec};
use crate::classify::{find_witness, MAX_VARS};
use crate::frames::{
    checkable_rules, full, ComplexAlgebra, Countermodel, LEFrame, Polarity, Relation, Set, LATTICE_BOUND,
};
use crate::search::{
    decide, derive_cutfree, forward_generate, random_formula, Decision, DeriveResult, GenConfig, DEFAULT_BUDGET,
};
use crate::syntax::{parse_inequality, parse_sequent, Sequent};

/// Per-sequent limit for the base axioms.
pub const AXIOM_LIMIT: Duration = Duration::from_secs(1);
/// Per-bundle limit for re-deriving the forward-generated proofs.
pub const CUT_ELIM_LIMIT: Duration = Duration::from_secs(300);
/// Per-goal limit for decisions.
pub const DECIDE_LIMIT: Duration = Duration::from_secs(30);
/// Limit for the classification suite.
pub const CLASSIFY_LIMIT: Duration = Duration::from_secs(60);
/// Limit for the orthologic run.
pub const ORTHO_LIMIT: Duration = Duration::from_secs(60);
/// Largest countermodel algebra whose rules are checked exhaustively.
pub const RULE_CHECK_ELEMENTS: usize = 64;
/// Largest goal complexity for random underivable goals.
pub const GOAL_COMPLEXITY: usize = 6;

/// Bundles (with rule selections) exercised by the proof-theoretic criteria.
pub const CALCULI: &[&str] =
    &["lattice", "modal-epistemic", "fl-base", "fl", "fl-base+exchange", "fl-base+weakening", "lg+grishin", "ortho"];

#[derive(Clone, Debug)]
pub struct Config {
    pub proofs: usize,
    pub goals: usize,
    pub frames: usize,
    pub relations: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config { proofs: 200, goals: 50, frames: 100, relations: 500, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}] {}: {} ({:.2?})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed
        )
    }
}

fn outcome(id: u8, title: &'static str, start: Instant, failures: &[String], detail: String) -> Outcome {
    let detail = match failures.first() {
        None => detail,
        Some(first) => format!("{detail}; {} failure(s), first: {first}", failures.len()),
    };
    Outcome { id, title, passed: failures.is_empty(), detail, elapsed: start.elapsed() }
}

/// 1. Every base axiom sequent of every bundled signature derives cut-free.
pub fn base_axioms() -> Outcome {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut n = 0;
    for name in NAMES {
        let calc = Bundle::load(name).expect("bundle").calculus();
        for s in crate::bundles::base_axioms(&calc.sig) {
            n += 1;
            let t = Instant::now();
            let r = derive_cutfree(&s, &calc, DEFAULT_BUDGET);
            let dt = t.elapsed();
            if !r.is_derivable() {
                fails.push(format!("{name}: {s} not derived"));
            } else if dt > AXIOM_LIMIT {
                fails.push(format!("{name}: {s} took {dt:.2?}"));
            }
        }
    }
    outcome(1, "base axioms derivable", start, &fails, format!("{n} sequents over {} signatures", NAMES.len()))
}

/// 2. Endsequents of forward-generated proofs with Cut re-derive cut-free.
pub fn cut_elimination(cfg: &Config) -> Outcome {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut total = 0;
    for (k, name) in CALCULI.iter().enumerate() {
        let t = Instant::now();
        let calc = Bundle::load(name).expect("bundle").calculus();
        let proofs = forward_generate(&calc, &GenConfig::default(), cfg.proofs, cfg.seed + k as u64);
        if proofs.len() < cfg.proofs {
            fails.push(format!("{name}: only {} proofs generated", proofs.len()));
        }
        for (s, p) in &proofs {
            total += 1;
            if let Err(e) = p.check(&calc) {
                fails.push(format!("{name}: generated proof of {s} is invalid: {e}"));
                continue;
            }
            match derive_cutfree(s, &calc, DEFAULT_BUDGET) {
                DeriveResult::Derivable(q) => {
                    if q.uses("Cut") || q.check(&calc).is_err() {
                        fails.push(format!("{name}: bad cut-free proof of {s}"));
                    }
                }
                _ => fails.push(format!("{name}: {s} not re-derived")),
            }
        }
        if t.elapsed() > CUT_ELIM_LIMIT {
            fails.push(format!("{name}: took {:.2?}", t.elapsed()));
        }
    }
    outcome(2, "cut elimination", start, &fails, format!("{total} proofs over {} calculi", CALCULI.len()))
}

/// Distinct random goals `s => t` with complexity at most [`GOAL_COMPLEXITY`].
pub fn random_goals(bundle: &Bundle, seed: u64) -> impl Iterator<Item = Sequent> + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: Vec<String> = ["p", "q", "r"].iter().map(|s| s.to_string()).collect();
    let mut seen = BTreeSet::new();
    std::iter::from_fn(move || loop {
        let total = rng.gen_range(1..=GOAL_COMPLEXITY);
        let left = rng.gen_range(0..=total);
        let a = random_formula(&bundle.sig, &atoms, left, &mut rng);
        let b = random_formula(&bundle.sig, &atoms, total - left, &mut rng);
        let s = Sequent::formulas(a, b);
        if s.complexity() <= GOAL_COMPLEXITY && seen.insert(s.clone()) {
            return Some(s);
        }
    })
    .take(20_000)
}

/// Refuted goals per calculus with their countermodels.
pub struct Refutations {
    pub calculus: String,
    pub models: Vec<Countermodel>,
}

/// 3. Underivable goals are decided with a refuting countermodel.
pub fn decisions(cfg: &Config) -> (Outcome, Vec<Refutations>) {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut all = Vec::new();
    for (k, name) in CALCULI.iter().enumerate() {
        let bundle = Bundle::load(name).expect("bundle");
        let calc = bundle.calculus();
        if calc.certificate().is_none() {
            continue;
        }
        let mut models = Vec::new();
        for goal in random_goals(&bundle, cfg.seed * 1000 + k as u64) {
            if models.len() >= cfg.goals {
                break;
            }
            let t = Instant::now();
            let d = decide(&goal, &calc, DEFAULT_BUDGET);
            let dt = t.elapsed();
            if dt > DECIDE_LIMIT {
                fails.push(format!("{name}: {goal} took {dt:.2?}"));
            }
            match d {
                Ok(Decision::Derivable(_)) => {}
                Ok(Decision::NotDerivable(cm)) => {
                    let replay = Countermodel::from_json(&cm.to_json());
                    match replay.as_ref().map(|r| r.refutes()) {
                        Ok(Ok(true)) if cm.goal == goal => models.push(*cm),
                        _ => fails.push(format!("{name}: exported countermodel for {goal} does not refute it")),
                    }
                }
                Ok(Decision::Unsupported(m)) | Ok(Decision::Unknown(m)) => {
                    fails.push(format!("{name}: {goal} undecided: {m}"))
                }
                Err(e) => fails.push(format!("{name}: {goal}: {e}")),
            }
        }
        if models.len() < cfg.goals {
            fails.push(format!("{name}: only {} underivable goals found", models.len()));
        }
        all.push(Refutations { calculus: name.to_string(), models });
    }
    let n: usize = all.iter().map(|r| r.models.len()).sum();
    let o = outcome(
        3,
        "decision with countermodels",
        start,
        &fails,
        format!("{n} goals refuted over {} calculi", all.len()),
    );
    (o, all)
}

/// 4. Operator laws hold in complex algebras of random stabilized frames.
pub fn operator_laws(cfg: &Config) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fails = Vec::new();
    let sigs: Vec<Bundle> =
        NAMES.iter().filter(|n| **n != "lattice").map(|n| Bundle::load(n).expect("bundle")).collect();
    for k in 0..cfg.frames {
        let b = &sigs[k % sigs.len()];
        let (w, u) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let frame = LEFrame::random_stabilized(&b.sig, w, u, &mut rng);
        if let Err(e) = frame.check_stability() {
            fails.push(format!("frame {k} ({}): not stable: {e}", b.name));
            continue;
        }
        match ComplexAlgebra::new(&frame, LATTICE_BOUND) {
            Ok(alg) => fails.extend(alg.operator_law_violations(&b.sig).into_iter().map(|v| format!("frame {k}: {v}"))),
            Err(e) => fails.push(format!("frame {k}: {e}")),
        }
    }
    outcome(4, "complex algebra operator laws", start, &fails, format!("{} frames", cfg.frames))
}

fn random_set(n: usize, rng: &mut impl Rng) -> Set {
    let mut s = Set::with_capacity(n);
    for i in 0..n {
        if rng.gen_bool(0.5) {
            s.insert(i);
        }
    }
    s
}

/// 5. Galois connection and section laws on random relations.
pub fn galois_laws(cfg: &Config) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut fails = Vec::new();
    for k in 0..cfg.relations {
        let (w, u) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let pol = Polarity::random(w, u, rng.gen_range(0.1..0.9), &mut rng);
        let x = random_set(w, &mut rng);
        let mut bigger = x.clone();
        bigger.union_with(&random_set(w, &mut rng));
        let y = random_set(u, &mut rng);
        let cx = pol.closure(&x);
        if pol.closure(&cx) != cx {
            fails.push(format!("relation {k}: closure not idempotent"));
        }
        if !x.is_subset(&cx) {
            fails.push(format!("relation {k}: X not below its closure"));
        }
        if !pol.up(&bigger).is_subset(&pol.up(&x)) {
            fails.push(format!("relation {k}: up is not antitone"));
        }
        let mut ybig = y.clone();
        ybig.union_with(&random_set(u, &mut rng));
        if !pol.down(&ybig).is_subset(&pol.down(&y)) {
            fails.push(format!("relation {k}: down is not antitone"));
        }
        if !y.is_subset(&pol.closure_u(&y)) {
            fails.push(format!("relation {k}: Y not below its closure"));
        }

        let arity = rng.gen_range(1..=3);
        let dims: Vec<usize> = (0..=arity).map(|_| rng.gen_range(1..=4)).collect();
        let rel = Relation::random(dims.clone(), rng.gen_range(0.2..0.95), &mut rng);
        let cs: Vec<Set> = dims[1..].iter().map(|&d| random_set(d, &mut rng)).collect();
        let s0 = rel.section0(&cs);
        for i in 1..=arity {
            if !cs[i - 1].is_subset(&rel.section(i, &s0, &cs)) {
                fails.push(format!("relation {k}: composition lemma fails in coordinate {i}"));
            }
        }
        let everything: Vec<Set> = dims[1..].iter().map(|&d| full(d)).collect();
        if !rel.section0(&everything).is_subset(&s0) {
            fails.push(format!("relation {k}: section is not antitone"));
        }
    }
    outcome(5, "Galois and section laws", start, &fails, format!("{} relations", cfg.relations))
}

/// 6. Bundled axioms have witnesses; the non-inductive samples have none.
pub fn classification() -> Outcome {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut n = 0;
    for name in ["lg", "ortho", "fl"] {
        let b = Bundle::load(name).expect("bundle");
        for (text, ineq) in b.axioms.iter().zip(b.axiom_inequalities().expect("axioms")) {
            n += 1;
            match find_witness(&ineq, &b.sig) {
                Ok(Some(_)) => {}
                Ok(None) => fails.push(format!("{name}: {text} has no witness")),
                Err(e) => fails.push(format!("{name}: {text}: {e}")),
            }
        }
    }
    for (name, text) in NON_INDUCTIVE {
        n += 1;
        let b = Bundle::load(name).expect("bundle");
        let ineq = parse_inequality(text, &b.sig).expect("inequality");
        if crate::classify::variables(&ineq).len() > MAX_VARS || !matches!(find_witness(&ineq, &b.sig), Ok(None)) {
            fails.push(format!("{text} unexpectedly has a witness"));
        }
    }
    if start.elapsed() > CLASSIFY_LIMIT {
        fails.push(format!("took {:.2?}", start.elapsed()));
    }
    outcome(6, "classification regression", start, &fails, format!("{n} inequalities"))
}

/// 7. Structural rules are valid in every small countermodel algebra.
pub fn countermodel_rules(refutations: &[Refutations]) -> Outcome {
    let start = Instant::now();
    let mut fails = Vec::new();
    let (mut models, mut checks) = (0, 0);
    for r in refutations {
        let calc = Bundle::load(&r.calculus).expect("bundle").calculus();
        let rules = checkable_rules(&calc);
        for cm in &r.models {
            let Ok(alg) = cm.algebra(RULE_CHECK_ELEMENTS) else { continue };
            models += 1;
            for rule in &rules {
                checks += 1;
                match alg.check_rule(rule, u64::MAX) {
                    Ok(c) if c.violation.is_none() => {}
                    Ok(c) => fails.push(format!(
                        "{}: {} fails in the countermodel for {} at {}",
                        r.calculus,
                        rule.name,
                        cm.goal,
                        c.violation.unwrap_or_default()
                    )),
                    Err(e) => fails.push(format!("{}: {}: {e}", r.calculus, rule.name)),
                }
            }
        }
    }
    if models == 0 {
        fails.push("no countermodel small enough to check".into());
    }
    outcome(
        7,
        "structural rules valid in countermodels",
        start,
        &fails,
        format!("{models} algebras, {checks} rule checks"),
    )
}

/// 8. Orthologic: double negation both ways, distributivity refuted.
pub fn orthologic() -> (Outcome, Option<Countermodel>) {
    let start = Instant::now();
    let mut fails = Vec::new();
    let calc = Bundle::load("ortho").expect("bundle").calculus();
    for text in ["p => not(not(p))", "not(not(p)) => p"] {
        let goal = parse_sequent(text, &calc.sig).expect("sequent");
        if !derive_cutfree(&goal, &calc, DEFAULT_BUDGET).is_derivable() {
            fails.push(format!("{text} not derived"));
        }
    }
    let dist = parse_sequent("p & (q | r) => (p & q) | (p & r)", &calc.sig).expect("sequent");
    let mut model = None;
    match decide(&dist, &calc, DEFAULT_BUDGET) {
        Ok(Decision::NotDerivable(cm)) => {
            if !matches!(cm.refutes(), Ok(true)) {
                fails.push("countermodel does not refute distributivity".into());
            }
            model = Some(*cm);
        }
        Ok(d) => fails.push(format!("distributivity decided with exit code {}", d.exit_code())),
        Err(e) => fails.push(format!("distributivity: {e}")),
    }
    if start.elapsed() > ORTHO_LIMIT {
        fails.push(format!("took {:.2?}", start.elapsed()));
    }
    let detail = match &model {
        Some(cm) => format!("distributivity refuted on |W|={}, |U|={}", cm.frame.pol.w_len(), cm.frame.pol.u_len()),
        None => "no countermodel".into(),
    };
    (outcome(8, "orthologic end to end", start, &fails, detail), model)
}

/// The display-calculus example rule, on the LG signature.
pub const EXAMPLE_RULE: (&str, &str) = ("F.bslstar(Y1, F.circ(X1, X2)) => Y2", "F.circ(F.bslstar(Y1, X1), X2) => Y2");

/// 9. The checker accepts the example and bundled rules and names the
///    violated condition for each synthetic rule.
pub fn analyticity() -> Outcome {
    let start = Instant::now();
    let mut fails = Vec::new();
    let lg = Bundle::load("lg").expect("bundle");
    let spec = |name: &str, prem: &str, concl: &str| RuleSpec {
        name: name.into(),
        premises: vec![prem.into()],
        conclusion: concl.into(),
        invertible: false,
    };
    let example = spec("example", EXAMPLE_RULE.0, EXAMPLE_RULE.1).to_schema(&lg.sig).expect("rule");
    if !check_analytic(&example, &lg.sig).accepted() {
        fails.push("example rule rejected".into());
    }
    let mut bundled = 0;
    for name in NAMES {
        for set in std::iter::once(String::new()).chain(Bundle::available_rulesets(name)) {
            let spec = if set.is_empty() { name.to_string() } else { format!("{name}+{set}") };
            let b = Bundle::load(&spec).expect("bundle");
            for r in &b.calculus().structural {
                bundled += 1;
                if !check_analytic(r, &b.sig).accepted() {
                    fails.push(format!("{spec}: {} rejected", r.name));
                }
            }
        }
    }
    let synthetic = [
        (spec("drop", "F.circ(X1, X3) => Y1", "F.circ(X1, X2) => Y1"), Condition::C1),
        (spec("dup", "X1 => Y1", "F.circ(X1, X1) => Y1"), Condition::C3),
    ];
    for (s, want) in synthetic {
        let r = s.to_schema(&lg.sig).expect("rule");
        let got = check_analytic(&r, &lg.sig).failed();
        if got != [want] {
            fails.push(format!("{}: expected {want:?}, got {got:?}", r.name));
        }
    }
    outcome(9, "analyticity checker", start, &fails, format!("example, {bundled} bundled rules, 2 synthetic"))
}

/// Runs all criteria in order.
pub fn run_all(cfg: &Config) -> Vec<Outcome> {
    let mut out = vec![base_axioms(), cut_elimination(cfg)];
    let (o3, mut refs) = decisions(cfg);
    out.push(o3);
    out.push(operator_laws(cfg));
    out.push(galois_laws(cfg));
    out.push(classification());
    let (o8, ortho) = orthologic();
    refs.extend(ortho.map(|cm| Refutations { calculus: "ortho".into(), models: vec![cm] }));
    out.push(countermodel_rules(&refs));
    out.push(o8);
    out.push(analyticity());
    out
}
