//! Property tests for the invariants of each module.

use std::collections::BTreeMap;

use dle_core::bundles::{Bundle, NAMES};
use dle_core::calculus::{base_rules, check_analytic, complexity_non_increasing, match_oriented, RuleClass};
use dle_core::classify::{
    find_witness, is_analytic_inductive, signed_tree, strict_partial_orders, variables, InductiveWitness, NodeClass,
    Sign, SignedNode,
};
use dle_core::frames::{ComplexAlgebra, LEFrame, Polarity, Set, LATTICE_BOUND};
use dle_core::search::{backward_closure, derive_cutfree, random_formula, DeriveResult, Quotient};
use dle_core::signature::{Origin, Sort, Tone};
use dle_core::syntax::{parse_formula, parse_sequent, subterms, well_sorted, Formula, Sequent};
use dle_core::{Connective, Signature};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bundle(i: usize) -> Bundle {
    Bundle::load(NAMES[i % NAMES.len()]).unwrap()
}

fn formula(b: &Bundle, size: usize, seed: u64) -> Formula {
    let atoms = vec!["p".to_string(), "q".to_string(), "r".to_string()];
    random_formula(&b.sig, &atoms, size, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn goal(b: &Bundle, size: usize, seed: u64) -> Sequent {
    let split = (seed as usize) % (size + 1);
    Sequent::formulas(formula(b, split, seed), formula(b, size - split, seed.wrapping_add(1)))
}

// ------------------------------------------------------------ signature

#[test]
fn residual_order_types_follow_the_tense_expansion() {
    for name in NAMES {
        let sig = Bundle::load(name).unwrap().sig.expand();
        for c in sig.iter().filter(|c| !c.is_base()) {
            let Origin::Residual { parent, coord } = &c.origin else { unreachable!() };
            let p = sig.get(parent).unwrap();
            let i = coord - 1;
            assert_eq!(c.arity, p.arity);
            for j in 0..p.arity {
                let expected = match (p.order_type.get(i), j == i) {
                    (t, true) => t,
                    (Tone::One, false) => p.order_type.get(j).dual(),
                    (Tone::Dual, false) => p.order_type.get(j),
                };
                assert_eq!(c.order_type.get(j), expected, "{} coordinate {}", c.name, j + 1);
            }
            let family = if p.order_type.get(i) == Tone::One { p.family.flip() } else { p.family };
            assert_eq!(c.family, family, "{}", c.name);
        }
    }
}

#[test]
fn expand_keeps_base_connectives() {
    for name in NAMES {
        let sig = Bundle::load(name).unwrap().sig;
        let ex = sig.expand();
        for c in sig.base() {
            assert_eq!(ex.get(&c.name), Some(c));
        }
        assert_eq!(ex.expand(), ex);
    }
}

// ------------------------------------------------------------ syntax

proptest! {
    #[test]
    fn formulas_round_trip(b in 0usize..6, size in 0usize..8, seed in any::<u64>()) {
        let b = bundle(b);
        let f = formula(&b, size, seed);
        prop_assert_eq!(parse_formula(&f.to_string(), &b.sig).unwrap(), f);
    }

    #[test]
    fn closure_members_round_trip_and_are_well_sorted(b in 0usize..6, size in 1usize..5, seed in any::<u64>()) {
        let b = bundle(b);
        let calc = b.calculus();
        let cl = backward_closure(&goal(&b, size, seed), &calc, 5_000);
        for s in cl.members.iter().take(300) {
            prop_assert!(well_sorted(&s.ant, &calc.sig.expand(), Sort::F));
            prop_assert!(well_sorted(&s.suc, &calc.sig.expand(), Sort::G));
            prop_assert_eq!(&parse_sequent(&s.to_string(), &calc.sig).unwrap(), s);
        }
    }

    #[test]
    fn subterms_are_closed(b in 0usize..6, size in 0usize..8, seed in any::<u64>()) {
        let b = bundle(b);
        let s = goal(&b, size, seed);
        let (structs, fmls) = subterms(&s);
        for t in &structs {
            let (inner_s, inner_f) = subterms(&Sequent::new(t.clone(), t.clone()));
            prop_assert!(inner_s.is_subset(&structs));
            prop_assert!(inner_f.is_subset(&fmls));
        }
    }
}

// ------------------------------------------------------------ calculus

#[test]
fn base_rules_never_grow_bottom_up() {
    for name in NAMES {
        let sig = Bundle::load(name).unwrap().sig;
        for r in base_rules(&sig).iter().filter(|r| r.class != RuleClass::Cut) {
            assert!(complexity_non_increasing(r), "{name}: {}", r.name);
        }
    }
}

#[test]
fn bundled_rules_are_analytic() {
    for name in NAMES {
        for set in Bundle::available_rulesets(name) {
            let b = Bundle::load(&format!("{name}+{set}")).unwrap();
            for r in &b.calculus().structural {
                assert!(check_analytic(r, &b.sig).accepted(), "{}: {}", b.name, r.name);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn display_rules_are_invertible(b in 2usize..6, size in 1usize..5, seed in any::<u64>()) {
        let b = bundle(b);
        let calc = b.calculus();
        let cl = backward_closure(&goal(&b, size, seed), &calc, 3_000);
        let display: Vec<_> = calc.rules.iter().filter(|r| r.class == RuleClass::Display).collect();
        for s in cl.members.iter().take(200) {
            for r in &display {
                for ps in match_oriented(r, false, s) {
                    let back = match_oriented(r, true, &ps[0]);
                    prop_assert!(back.iter().any(|x| x == &vec![s.clone()]), "{} on {}", r.name, s);
                }
            }
        }
    }
}

// ------------------------------------------------------------ classify

fn check_classes(n: &SignedNode) {
    if n.children.is_empty() {
        assert_eq!(n.class, NodeClass::Leaf);
    } else {
        assert!(n.class.is_skeleton() != n.class.is_pia(), "{n}");
        if n.label == "&" || n.label == "|" {
            let expect =
                if (n.label == "|") == (n.sign == Sign::Plus) { NodeClass::DeltaAdjoint } else { NodeClass::Sra };
            assert_eq!(n.class, expect);
        }
    }
    n.children.iter().for_each(check_classes);
}

fn signs(n: &SignedNode, out: &mut Vec<Sign>) {
    out.push(n.sign);
    n.children.iter().for_each(|c| signs(c, out));
}

/// Random term whose positive (or negative) tree has Skeleton nodes only.
fn skeleton_term(sig: &Signature, sign: Sign, depth: usize, rng: &mut ChaCha8Rng) -> Formula {
    use rand::Rng;
    let vars = ["p", "q", "r", "s"];
    if depth == 0 || rng.gen_bool(0.3) {
        return Formula::atom(vars[rng.gen_range(0..vars.len())]);
    }
    let want = if sign == Sign::Plus { Sort::F } else { Sort::G };
    let conns: Vec<&Connective> = sig.base().filter(|c| c.family == want && c.arity > 0).collect();
    let k = rng.gen_range(0..=conns.len());
    if k == conns.len() {
        let a = skeleton_term(sig, sign, depth - 1, rng);
        let b = skeleton_term(sig, sign, depth - 1, rng);
        return if sign == Sign::Plus { Formula::join(a, b) } else { Formula::meet(a, b) };
    }
    let c = conns[k];
    let args = (0..c.arity)
        .map(|i| {
            let s = if c.order_type.get(i) == Tone::One {
                sign
            } else {
                if sign == Sign::Plus {
                    Sign::Minus
                } else {
                    Sign::Plus
                }
            };
            skeleton_term(sig, s, depth - 1, rng)
        })
        .collect();
    Formula::app(&c.name, args)
}

fn leaf_signs(n: &SignedNode, out: &mut BTreeMap<String, Vec<Sign>>) {
    if let Some(v) = &n.var {
        out.entry(v.clone()).or_default().push(n.sign);
    }
    n.children.iter().for_each(|c| leaf_signs(c, out));
}

proptest! {
    #[test]
    fn sign_flip_is_an_involution(b in 1usize..6, size in 0usize..8, seed in any::<u64>()) {
        let b = bundle(b);
        let f = formula(&b, size, seed);
        let plus = signed_tree(&f, Sign::Plus, &b.sig).unwrap();
        let minus = signed_tree(&f, Sign::Minus, &b.sig).unwrap();
        let (mut a, mut m) = (vec![], vec![]);
        signs(&plus, &mut a);
        signs(&minus, &mut m);
        prop_assert_eq!(a.iter().map(|s| s.flip()).collect::<Vec<_>>(), m);
        check_classes(&plus);
        check_classes(&minus);
    }

    #[test]
    fn uniform_skeleton_inequalities_are_analytic(b in 1usize..6, seed in any::<u64>()) {
        let b = bundle(b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = skeleton_term(&b.sig, Sign::Plus, 3, &mut rng);
        let t = skeleton_term(&b.sig, Sign::Minus, 3, &mut rng);
        let ineq = (s, t);
        let mut occ = BTreeMap::new();
        leaf_signs(&signed_tree(&ineq.0, Sign::Plus, &b.sig).unwrap(), &mut occ);
        leaf_signs(&signed_tree(&ineq.1, Sign::Minus, &b.sig).unwrap(), &mut occ);
        let vars = variables(&ineq);
        let uniform = occ.values().all(|v| v.iter().all(|s| *s == v[0]));
        prop_assume!(uniform);
        let epsilon = vars.iter().map(|v| if occ[v][0] == Sign::Plus { Tone::One } else { Tone::Dual }).collect();
        let w = InductiveWitness { vars, epsilon, omega: Default::default() };
        prop_assert!(is_analytic_inductive(&ineq, &b.sig, &w).unwrap().holds);
    }

    #[test]
    fn witness_search_agrees_with_exhaustive_check(b in 1usize..6, size in 0usize..5, seed in any::<u64>()) {
        let b = bundle(b);
        let ineq = (formula(&b, size, seed), formula(&b, 4 - size.min(4), seed ^ 1));
        let vars = variables(&ineq);
        let found = find_witness(&ineq, &b.sig).unwrap();
        if let Some(w) = &found {
            prop_assert!(w.is_well_formed());
            prop_assert!(is_analytic_inductive(&ineq, &b.sig, w).unwrap().holds);
        }
        let n = vars.len();
        let mut any = false;
        for m in 0..1u32 << n {
            let epsilon: Vec<Tone> = (0..n).map(|i| if m >> i & 1 == 1 { Tone::Dual } else { Tone::One }).collect();
            for &p in strict_partial_orders(n) {
                let omega = (0..n * n).filter(|k| p >> k & 1 == 1).map(|k| (k / n, k % n)).collect();
                let w = InductiveWitness { vars: vars.clone(), epsilon: epsilon.clone(), omega };
                any |= is_analytic_inductive(&ineq, &b.sig, &w).unwrap().holds;
            }
        }
        prop_assert_eq!(found.is_some(), any);
    }
}

// ------------------------------------------------------------ search

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn complete_closures_are_fixpoints(b in 0usize..6, size in 1usize..5, seed in any::<u64>()) {
        let b = bundle(b);
        let calc = b.calculus();
        let cl = backward_closure(&goal(&b, size, seed), &calc, 20_000);
        prop_assume!(cl.complete);
        for s in &cl.members {
            for r in calc.rules.iter().filter(|r| r.class != RuleClass::Cut) {
                for inv in [false, true] {
                    if r.oriented(inv).is_none() {
                        continue;
                    }
                    if let Some(ps) = calc.quotient.apply(r, inv, s) {
                        for p in ps {
                            prop_assert!(cl.members.contains(&calc.quotient.canon_seq(&p)), "{} from {}", p, s);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cut_free_proofs_replay(b in 0usize..6, size in 1usize..6, seed in any::<u64>()) {
        let b = bundle(b);
        let calc = b.calculus();
        if let DeriveResult::Derivable(p) = derive_cutfree(&goal(&b, size, seed), &calc, 20_000) {
            prop_assert!(!p.uses("Cut"));
            prop_assert_eq!(p.check(&calc), Ok(()));
        }
    }

    #[test]
    fn star_parity_quotient_is_safe(size in 1usize..5, seed in any::<u64>()) {
        let b = Bundle::load("ortho").unwrap();
        let with = b.calculus();
        let without = with.with_quotient(Quotient::none());
        let g = goal(&b, size, seed);
        let x = derive_cutfree(&g, &with, 20_000);
        let y = derive_cutfree(&g, &without, 20_000);
        let known = |r: &DeriveResult| !matches!(r, DeriveResult::Unknown(_));
        if known(&x) && known(&y) {
            prop_assert_eq!(x.is_derivable(), y.is_derivable(), "{}", g);
        }
    }
}

// ------------------------------------------------------------ frames

fn random_subset(n: usize, rng: &mut ChaCha8Rng) -> Set {
    use rand::Rng;
    let mut s = Set::with_capacity(n);
    (0..n).filter(|_| rng.gen_bool(0.5)).for_each(|i| s.insert(i));
    s
}

proptest! {
    #[test]
    fn galois_laws(w in 1usize..7, u in 1usize..7, density in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pol = Polarity::random(w, u, density, &mut rng);
        let x = random_subset(w, &mut rng);
        let y = random_subset(u, &mut rng);
        prop_assert_eq!(pol.up(&pol.down(&pol.up(&x))), pol.up(&x));
        prop_assert_eq!(pol.down(&pol.up(&pol.down(&y))), pol.down(&y));
        prop_assert!(x.is_subset(&pol.down(&pol.up(&x))));
        let mut bigger = x.clone();
        bigger.union_with(&random_subset(w, &mut rng));
        prop_assert!(pol.up(&bigger).is_subset(&pol.up(&x)));
    }

    #[test]
    fn sections_of_stable_sets_are_stable(b in 1usize..6, w in 1usize..5, u in 1usize..5, seed in any::<u64>()) {
        let b = bundle(b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = LEFrame::random_stabilized(&b.sig, w, u, &mut rng);
        let pol = &frame.pol;
        let side = |s: Sort, rng: &mut ChaCha8Rng| match s {
            Sort::F => pol.closure(&random_subset(pol.w_len(), rng)),
            Sort::G => pol.closure_u(&random_subset(pol.u_len(), rng)),
        };
        let close = |s: Sort, x: &Set| match s {
            Sort::F => pol.closure(x),
            Sort::G => pol.closure_u(x),
        };
        for c in b.sig.base() {
            let sorts: Vec<Sort> = (0..c.arity).map(|i| c.arg_sort(i)).collect();
            let args: Vec<Set> = sorts.iter().map(|&s| side(s, &mut rng)).collect();
            let out = c.family.flip();
            let sec = frame.section0(&c.name, &args);
            prop_assert_eq!(&close(out, &sec), &sec, "{} section not stable", c.name);
            for i in 0..c.arity {
                let mut raw = args.clone();
                raw[i] = match sorts[i] {
                    Sort::F => random_subset(pol.w_len(), &mut rng),
                    Sort::G => random_subset(pol.u_len(), &mut rng),
                };
                let mut closed = raw.clone();
                closed[i] = close(sorts[i], &raw[i]);
                prop_assert_eq!(frame.section0(&c.name, &raw), frame.section0(&c.name, &closed), "{} coordinate {}", c.name, i + 1);
            }
        }
    }

    #[test]
    fn residuals_agree_with_brute_force(b in 2usize..6, w in 1usize..4, u in 1usize..4, seed in any::<u64>()) {
        let b = bundle(b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = LEFrame::random_stabilized(&b.sig, w, u, &mut rng);
        let alg = ComplexAlgebra::new(&frame, LATTICE_BOUND).unwrap();
        let full = b.sig.expand();
        let m = alg.len();
        for c in full.iter().filter(|c| !c.is_base()) {
            let Origin::Residual { parent, coord } = &c.origin else { unreachable!() };
            let p = full.get(parent).unwrap();
            let i = coord - 1;
            // Residuation: parent(.., x, ..) <= y iff x <= residual(.., y, ..), up to the order type.
            for k in 0..m.pow(c.arity as u32) {
                let args: Vec<usize> = (0..c.arity).map(|j| k / m.pow(j as u32) % m).collect();
                let r = alg.op(&c.name, &args).unwrap();
                let y = args[i];
                for x in 0..m {
                    let mut pa = args.clone();
                    pa[i] = x;
                    let v = alg.op(parent, &pa).unwrap();
                    let lhs = match p.family { Sort::F => alg.leq(v, y), Sort::G => alg.leq(y, v) };
                    let rhs = match (p.family, p.order_type.get(i)) {
                        (Sort::F, Tone::One) | (Sort::G, Tone::Dual) => alg.leq(x, r),
                        _ => alg.leq(r, x),
                    };
                    prop_assert_eq!(lhs, rhs, "{} at {:?} with {}", c.name, args, x);
                }
            }
        }
    }
}

#[test]
fn countermodel_files_replay() {
    let calc = Bundle::load("fl-base").unwrap().calculus();
    let g = parse_sequent("F.circ(p, q) => circ(q, p)", &calc.sig).unwrap();
    let Ok(dle_core::search::Decision::NotDerivable(cm)) = dle_core::search::decide(&g, &calc, 10_000) else {
        panic!("expected a countermodel");
    };
    let back = dle_core::frames::Countermodel::from_json(&cm.to_json()).unwrap();
    assert_eq!(back.to_json(), cm.to_json());
    assert!(back.refutes().unwrap());
}
