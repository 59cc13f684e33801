//! Cut-free backward proof search over the finite closure of a goal,
//! quotients on structures, forward proof generation, and the decision
//! procedure.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{
    base_rules, complexity_non_increasing, instantiate_seq, match_meta, match_seq, Alias, Bindings, Meta, RuleClass,
    RuleSchema, SeqPat,
};
use crate::exec;
use crate::signature::{Signature, Sort};
use crate::syntax::{Formula, Sequent, Structure};

/// Default node budget for backward closures.
pub const DEFAULT_BUDGET: usize = 200_000;

// ---------------------------------------------------------------- quotients

/// The orthologic star: one unary connective per family, and the unit of the
/// G side written `𝕀` in the literature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Star {
    pub f: String,
    pub g: String,
    pub unit: String,
}

/// Structure-rewriting quotient: alias renaming and, optionally, removal of
/// double stars.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Quotient {
    pub name: String,
    aliases: HashMap<String, (String, Vec<usize>)>,
    pub star: Option<Star>,
}

impl Quotient {
    pub fn none() -> Quotient {
        Quotient { name: "none".into(), ..Default::default() }
    }

    pub fn with_aliases(aliases: &[Alias], sig: &Signature) -> Quotient {
        let sig = sig.expand();
        let map = aliases
            .iter()
            .map(|a| {
                let n = sig.get(&a.residual).map(|c| c.arity).unwrap_or(0);
                (a.residual.clone(), (a.target.clone(), a.permutation(n)))
            })
            .collect();
        Quotient { name: "alias".into(), aliases: map, star: None }
    }

    pub fn ortho(aliases: &[Alias], sig: &Signature, star: Star) -> Quotient {
        let mut q = Quotient::with_aliases(aliases, sig);
        q.name = "star-parity".into();
        q.star = Some(star);
        q
    }

    pub fn is_identity(&self) -> bool {
        self.aliases.is_empty() && self.star.is_none()
    }

    /// Canonical representative; idempotent and sort-preserving.
    pub fn canonicalize(&self, s: &Structure) -> Structure {
        if self.is_identity() {
            return s.clone();
        }
        match s {
            Structure::Fml(_) => s.clone(),
            Structure::SApp { sort, name, args } => {
                let args: Vec<Structure> = args.iter().map(|a| self.canonicalize(a)).collect();
                let (name, args) = match self.aliases.get(name) {
                    Some((t, perm)) => (t.clone(), perm.iter().map(|&j| args[j].clone()).collect()),
                    None => (name.clone(), args),
                };
                if let Some(star) = &self.star {
                    let inner = match sort {
                        Sort::F if name == star.f => Some(&star.g),
                        Sort::G if name == star.g => Some(&star.f),
                        _ => None,
                    };
                    if let (Some(inner), [Structure::SApp { name: n2, args: a2, .. }]) = (inner, args.as_slice()) {
                        if n2 == inner {
                            return a2[0].clone();
                        }
                    }
                }
                Structure::SApp { sort: *sort, name, args }
            }
        }
    }

    /// Matches a pattern against a canonical structure modulo the quotient:
    /// residual names match their alias targets, and a star pattern matches
    /// a structure not headed by that star through its double-star expansion.
    pub fn match_meta(&self, m: &Meta, s: &Structure, b: &mut Bindings) -> bool {
        let Meta::SApp(so, n, xs) = m else {
            return match m {
                Meta::Var(v) => match b.get(v) {
                    Some(old) => old == s,
                    None => {
                        b.insert(v.clone(), s.clone());
                        true
                    }
                },
                _ => match_meta(m, s, b),
            };
        };
        let (name, pats): (&String, Vec<&Meta>) = match self.aliases.get(n) {
            Some((t, perm)) => (t, perm.iter().map(|&j| &xs[j]).collect()),
            None => (n, xs.iter().collect()),
        };
        match s {
            Structure::SApp { sort, name: sn, args } if sort == so && sn == name => {
                args.len() == pats.len() && pats.iter().zip(args).all(|(x, a)| self.match_meta(x, a, b))
            }
            _ => {
                let Some(star) = &self.star else { return false };
                let is_star = match so {
                    Sort::F => *name == star.f,
                    Sort::G => *name == star.g,
                };
                if !is_star || pats.len() != 1 || matches!(s, Structure::SApp { sort, .. } if sort != so) {
                    return false;
                }
                match self.star_of(*so, s) {
                    Some(inner) => self.match_meta(pats[0], &inner, b),
                    None => false,
                }
            }
        }
    }

    pub fn match_seq(&self, p: &SeqPat, s: &Sequent, b: &mut Bindings) -> bool {
        self.match_meta(&p.ant, &s.ant, b) && self.match_meta(&p.suc, &s.suc, b)
    }

    /// Bottom-up application of one orientation of a rule to a canonical
    /// sequent; premises are canonicalized.
    pub fn apply(&self, rule: &RuleSchema, inverse: bool, goal: &Sequent) -> Option<Vec<Sequent>> {
        let (prems, concl) = rule.oriented(inverse)?;
        let mut b = Bindings::new();
        if !self.match_seq(concl, goal, &mut b) {
            return None;
        }
        prems.iter().map(|p| instantiate_seq(p, &b).map(|s| self.canon_seq(&s))).collect()
    }

    pub fn canon_seq(&self, s: &Sequent) -> Sequent {
        Sequent::new(self.canonicalize(&s.ant), self.canonicalize(&s.suc))
    }

    /// Star of a structure of the given sort (F-sort input gives a G-structure).
    pub fn star_of(&self, sort: Sort, s: &Structure) -> Option<Structure> {
        let star = self.star.as_ref()?;
        let name = match sort {
            Sort::F => &star.g,
            Sort::G => &star.f,
        };
        Some(self.canonicalize(&Structure::sapp(sort.flip(), name, vec![s.clone()])))
    }

    /// The finite carrier bound for a goal: substructures, subformulas at
    /// both sorts, their stars, the unit and its star (all canonical).
    pub fn sigma(&self, goal: &Sequent, sig: &Signature) -> Option<BTreeSet<(Sort, Structure)>> {
        let star = self.star.as_ref()?;
        let sig = sig.expand();
        let mut base = BTreeSet::new();
        goal.ant.substructures(Sort::F, &sig, &mut base);
        goal.suc.substructures(Sort::G, &sig, &mut base);
        let (_, fs) = crate::syntax::subterms(goal);
        for f in fs {
            base.insert((Sort::F, Structure::Fml(f.clone())));
            base.insert((Sort::G, Structure::Fml(f)));
        }
        let mut out = BTreeSet::new();
        for (sort, s) in &base {
            out.insert((*sort, self.canonicalize(s)));
            out.insert((sort.flip(), self.star_of(*sort, s)?));
        }
        let unit = Structure::sapp(Sort::G, &star.unit, vec![]);
        out.insert((Sort::F, self.star_of(Sort::G, &unit)?));
        out.insert((Sort::G, unit));
        Some(out)
    }
}

// ---------------------------------------------------------------- calculus

/// Why the decision procedure terminates on this calculus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Certificate {
    /// Every rule is complexity-non-increasing bottom-up.
    ComplexityNonIncreasing,
    /// Every closure member is equivalent to a pair drawn from the finite Σ set.
    SigmaBounded,
}

/// Signature, rules (generated + structural) and quotient.
#[derive(Clone, Debug)]
pub struct Calculus {
    pub name: String,
    pub sig: Signature,
    pub rules: Vec<RuleSchema>,
    pub structural: Vec<RuleSchema>,
    pub aliases: Vec<Alias>,
    pub quotient: Quotient,
    orientations: Vec<(usize, bool)>,
}

impl Calculus {
    /// Rule order: generated rules, alias identifications, structural rules, Cut.
    pub fn new(
        name: &str,
        sig: Signature,
        structural: Vec<RuleSchema>,
        aliases: Vec<Alias>,
        quotient: Quotient,
    ) -> Self {
        let mut rules: Vec<RuleSchema> = base_rules(&sig);
        let cut = rules.pop().expect("Cut is last");
        let mut extra: Vec<RuleSchema> = aliases.iter().map(|a| a.rule(&sig)).collect();
        extra.extend(structural);
        rules.extend(extra.iter().cloned());
        rules.push(cut);
        let orientations = rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class != RuleClass::Cut)
            .flat_map(|(i, r)| {
                let mut v = vec![(i, false)];
                if r.invertible {
                    v.push((i, true));
                }
                v
            })
            .collect();
        Calculus { name: name.to_string(), sig, rules, structural: extra, aliases, quotient, orientations }
    }

    pub fn lattice_only(sig: Signature) -> Self {
        Calculus::new("custom", sig, vec![], vec![], Quotient::none())
    }

    pub fn with_quotient(&self, q: Quotient) -> Self {
        let mut c = self.clone();
        c.quotient = q;
        c
    }

    pub fn with_rules(&self, name: &str, more: Vec<RuleSchema>) -> Self {
        let own: Vec<RuleSchema> =
            self.structural.iter().filter(|r| !r.name.starts_with("id_")).cloned().chain(more).collect();
        let mut c = Calculus::new(name, self.sig.clone(), own, self.aliases.clone(), self.quotient.clone());
        c.name = name.to_string();
        c
    }

    pub fn rule(&self, name: &str) -> Option<(usize, &RuleSchema)> {
        self.rules.iter().enumerate().find(|(_, r)| r.name == name)
    }

    pub fn certificate(&self) -> Option<Certificate> {
        if self.rules.iter().filter(|r| r.class != RuleClass::Cut).all(complexity_non_increasing) {
            Some(Certificate::ComplexityNonIncreasing)
        } else if self.quotient.star.is_some() {
            Some(Certificate::SigmaBounded)
        } else {
            None
        }
    }

    fn rule_label(&self, idx: usize, inverse: bool) -> String {
        let n = &self.rules[idx].name;
        if inverse {
            format!("{n}^-1")
        } else {
            n.clone()
        }
    }
}

// ---------------------------------------------------------------- closure

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub rule: usize,
    pub inverse: bool,
    pub premises: Vec<usize>,
}

/// The backward closure of a goal: members in discovery order, with the
/// rule-instance hyperedges leading to each member.
#[derive(Clone, Debug)]
pub struct BackwardClosure {
    pub members: IndexSet<Sequent>,
    pub edges: Vec<Vec<Edge>>,
    pub complete: bool,
    pub note: Option<String>,
}

impl BackwardClosure {
    pub fn root(&self) -> &Sequent {
        &self.members[0]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// All bottom-up rule applications to one sequent, premises canonicalized.
fn expand(calc: &Calculus, s: &Sequent) -> Vec<(usize, bool, Vec<Sequent>)> {
    calc.orientations
        .iter()
        .filter_map(|&(i, inv)| calc.quotient.apply(&calc.rules[i], inv, s).map(|ps| (i, inv, ps)))
        .collect()
}

pub fn backward_closure(goal: &Sequent, calc: &Calculus, budget: usize) -> BackwardClosure {
    let root = calc.quotient.canon_seq(goal);
    let sigma = calc.quotient.sigma(&root, &calc.sig);
    let mut members = IndexSet::new();
    members.insert(root);
    let mut edges: Vec<Vec<Edge>> = vec![vec![]];
    let mut frontier: Vec<usize> = vec![0];
    let mut complete = true;
    let mut note = None;
    'outer: while !frontier.is_empty() {
        let seqs: Vec<Sequent> = frontier.iter().map(|&i| members[i].clone()).collect();
        let expansions = exec::par_map(&seqs, |s| expand(calc, s));
        let mut next = Vec::new();
        for (&m, exps) in frontier.iter().zip(expansions) {
            for (rule, inverse, prems) in exps {
                let mut ids = Vec::with_capacity(prems.len());
                for p in prems {
                    if let Some(sigma) = &sigma {
                        if !sigma.contains(&(Sort::F, p.ant.clone())) || !sigma.contains(&(Sort::G, p.suc.clone())) {
                            complete = false;
                            note = Some(format!("member {p} leaves the Σ bound"));
                            break 'outer;
                        }
                    }
                    let (id, fresh) = members.insert_full(p);
                    if fresh {
                        edges.push(vec![]);
                        next.push(id);
                    }
                    ids.push(id);
                }
                edges[m].push(Edge { rule, inverse, premises: ids });
            }
            if members.len() > budget {
                complete = false;
                note = Some(format!("node budget {budget} exhausted"));
                break 'outer;
            }
        }
        frontier = next;
    }
    BackwardClosure { members, edges, complete, note }
}

// ---------------------------------------------------------------- proofs

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProofTree {
    #[serde(serialize_with = "ser_display")]
    pub conclusion: Sequent,
    pub rule: String,
    pub children: Vec<ProofTree>,
}

fn ser_display<S: serde::Serializer>(s: &Sequent, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&s.to_string())
}

impl ProofTree {
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ProofTree::depth).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofTree::size).sum::<usize>()
    }

    pub fn uses(&self, rule: &str) -> bool {
        self.rule == rule || self.children.iter().any(|c| c.uses(rule))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof serializes")
    }

    fn write_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}[{}] {}", "", self.rule, self.conclusion, indent = 2 * depth)?;
        self.children.iter().try_for_each(|c| c.write_indented(f, depth + 1))
    }

    /// Replays every node against its rule. Search trees carry canonical
    /// sequents, so instantiated premises are canonicalized before comparison.
    pub fn check(&self, calc: &Calculus) -> Result<(), String> {
        let (name, inverse) = match self.rule.strip_suffix("^-1") {
            Some(n) => (n, true),
            None => (self.rule.as_str(), false),
        };
        let (_, rule) = calc.rule(name).ok_or_else(|| format!("unknown rule {name}"))?;
        let ok = if rule.class == RuleClass::Cut {
            joint_match(rule, &self.conclusion, &self.children)
        } else {
            let q = &calc.quotient;
            let kids: Vec<Sequent> = self.children.iter().map(|c| q.canon_seq(&c.conclusion)).collect();
            q.apply(rule, inverse, &q.canon_seq(&self.conclusion)).is_some_and(|ps| ps == kids)
                || (!inverse && joint_match(rule, &self.conclusion, &self.children))
        };
        if !ok {
            return Err(format!("node [{}] {} does not follow from its children", self.rule, self.conclusion));
        }
        self.children.iter().try_for_each(|c| c.check(calc))
    }
}

fn joint_match(rule: &RuleSchema, concl: &Sequent, kids: &[ProofTree]) -> bool {
    if kids.len() != rule.premises.len() {
        return false;
    }
    let mut b = Bindings::new();
    match_seq(&rule.conclusion, concl, &mut b)
        && rule.premises.iter().zip(kids).all(|(p, k)| match_seq(p, &k.conclusion, &mut b))
}

impl fmt::Display for ProofTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

#[derive(Clone, Debug)]
pub enum DeriveResult {
    Derivable(ProofTree),
    NotDerivable,
    Unknown(String),
}

impl DeriveResult {
    pub fn is_derivable(&self) -> bool {
        matches!(self, DeriveResult::Derivable(_))
    }
}

/// Saturated closure: which members are derivable, and by which edge at
/// minimal depth.
pub struct Saturation {
    pub closure: BackwardClosure,
    pub depth: Vec<Option<u32>>,
    pub best: Vec<Option<usize>>,
}

impl Saturation {
    pub fn derivable(&self, i: usize) -> bool {
        self.depth[i].is_some()
    }

    pub fn proof(&self, calc: &Calculus, i: usize) -> Option<ProofTree> {
        let e = &self.closure.edges[i][self.best[i]?];
        let children = e.premises.iter().map(|&p| self.proof(calc, p)).collect::<Option<_>>()?;
        Some(ProofTree {
            conclusion: self.closure.members[i].clone(),
            rule: calc.rule_label(e.rule, e.inverse),
            children,
        })
    }
}

pub fn saturate(closure: BackwardClosure) -> Saturation {
    let n = closure.members.len();
    let mut depth: Vec<Option<u32>> = vec![None; n];
    let mut best = vec![None; n];
    let mut round = 0u32;
    loop {
        let mut found = Vec::new();
        for m in 0..n {
            if depth[m].is_some() {
                continue;
            }
            let hit =
                closure.edges[m].iter().position(|e| e.premises.iter().all(|&p| depth[p].is_some_and(|d| d < round)));
            if let Some(k) = hit {
                found.push((m, k));
            }
        }
        if found.is_empty() {
            break;
        }
        for (m, k) in found {
            depth[m] = Some(round);
            best[m] = Some(k);
        }
        round += 1;
    }
    Saturation { closure, depth, best }
}

pub fn derive_cutfree(goal: &Sequent, calc: &Calculus, budget: usize) -> DeriveResult {
    let sat = saturate(backward_closure(goal, calc, budget));
    if sat.derivable(0) {
        DeriveResult::Derivable(sat.proof(calc, 0).expect("derivable root has a proof"))
    } else if sat.closure.complete {
        DeriveResult::NotDerivable
    } else {
        DeriveResult::Unknown(sat.closure.note.clone().unwrap_or_default())
    }
}

// ---------------------------------------------------------------- decision

pub enum Decision {
    Derivable(ProofTree),
    NotDerivable(Box<crate::frames::Countermodel>),
    Unsupported(String),
    Unknown(String),
}

impl Decision {
    pub fn exit_code(&self) -> i32 {
        match self {
            Decision::Derivable(_) => 0,
            Decision::NotDerivable(_) => 1,
            Decision::Unsupported(_) | Decision::Unknown(_) => 2,
        }
    }
}

/// Total decision where a termination certificate holds; a refuting finite
/// countermodel accompanies every negative answer.
pub fn decide(goal: &Sequent, calc: &Calculus, budget: usize) -> Result<Decision, crate::frames::FrameError> {
    if calc.certificate().is_none() {
        let bad: Vec<&str> = calc
            .rules
            .iter()
            .filter(|r| r.class != RuleClass::Cut && !complexity_non_increasing(r))
            .map(|r| r.name.as_str())
            .collect();
        return Ok(Decision::Unsupported(format!(
            "no termination certificate: rules {} increase complexity bottom-up and no quotient bounds the closure",
            bad.join(", ")
        )));
    }
    let sat = saturate(backward_closure(goal, calc, budget));
    if sat.derivable(0) {
        return Ok(Decision::Derivable(sat.proof(calc, 0).expect("proof")));
    }
    if !sat.closure.complete {
        return Ok(Decision::Unknown(sat.closure.note.clone().unwrap_or_default()));
    }
    let cm = crate::frames::build_countermodel(&sat, calc)?;
    Ok(Decision::NotDerivable(Box::new(cm)))
}

// ---------------------------------------------------------------- forward generation

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_depth: usize,
    pub atoms: Vec<String>,
    pub pool_size: usize,
    pub attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_depth: 5, atoms: vec!["p".into(), "q".into()], pool_size: 12, attempts: 40_000 }
    }
}

/// A random formula over `atoms` using the lattice and base connectives.
pub fn random_formula(sig: &Signature, atoms: &[String], size: usize, rng: &mut impl Rng) -> Formula {
    let conns: Vec<_> = sig.base().cloned().collect();
    if size == 0 {
        let nullary: Vec<_> = conns.iter().filter(|c| c.arity == 0).collect();
        return match rng.gen_range(0..10) {
            0 => Formula::Top,
            1 => Formula::Bot,
            2 if !nullary.is_empty() => Formula::app(&nullary[rng.gen_range(0..nullary.len())].name, vec![]),
            _ => Formula::atom(&atoms[rng.gen_range(0..atoms.len())]),
        };
    }
    let ops: Vec<_> = conns.iter().filter(|c| c.arity > 0 && c.arity <= size).collect();
    let pick = rng.gen_range(0..2 + ops.len());
    let mut split = |k: usize| -> Vec<usize> {
        // distribute size-1 connective slots over k children
        let mut parts = vec![0; k];
        for _ in 0..size.saturating_sub(1) {
            parts[rng.gen_range(0..k)] += 1;
        }
        parts
    };
    match pick {
        0 | 1 => {
            let parts = split(2);
            let a = random_formula(sig, atoms, parts[0], rng);
            let b = random_formula(sig, atoms, parts[1], rng);
            if pick == 0 {
                Formula::meet(a, b)
            } else {
                Formula::join(a, b)
            }
        }
        k => {
            let c = ops[k - 2];
            let parts = split(c.arity);
            Formula::App(c.name.clone(), parts.into_iter().map(|s| random_formula(sig, atoms, s, rng)).collect())
        }
    }
}

struct Derived {
    seq: Sequent,
    proof: ProofTree,
    depth: usize,
}

fn fill_free(m: &Meta, b: &mut Bindings, pool: &[Formula], atoms: &[String], rng: &mut impl Rng) {
    match m {
        Meta::Var(v) | Meta::FVar(v) => {
            if !b.contains_key(v) {
                b.insert(v.clone(), Structure::Fml(pool[rng.gen_range(0..pool.len())].clone()));
            }
        }
        Meta::AVar(v) => {
            if !b.contains_key(v) {
                b.insert(v.clone(), Structure::atom(&atoms[rng.gen_range(0..atoms.len())]));
            }
        }
        Meta::Const(_) => {}
        Meta::Meet(x, y) | Meta::Join(x, y) => {
            fill_free(x, b, pool, atoms, rng);
            fill_free(y, b, pool, atoms, rng);
        }
        Meta::App(_, xs) | Meta::SApp(_, _, xs) => xs.iter().for_each(|x| fill_free(x, b, pool, atoms, rng)),
    }
}

const SAMPLE: usize = 256;

/// Pseudorandom proofs built top-down from axiom instances, using every rule
/// including Cut. Returns up to `count` distinct endsequents whose proofs use
/// Cut, each with depth at most `cfg.max_depth`. Deterministic in `seed`.
pub fn forward_generate(calc: &Calculus, cfg: &GenConfig, count: usize, seed: u64) -> Vec<(Sequent, ProofTree)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sig = &calc.sig;
    let mut pool: Vec<Formula> = cfg.atoms.iter().map(|a| Formula::atom(a)).collect();
    while pool.len() < cfg.pool_size {
        let size = rng.gen_range(1..=2);
        let f = random_formula(sig, &cfg.atoms, size, &mut rng);
        if !pool.contains(&f) {
            pool.push(f);
        }
    }
    let mut derived: Vec<Derived> = Vec::new();
    let mut seen: BTreeSet<Sequent> = BTreeSet::new();
    let mut outputs: Vec<(Sequent, ProofTree)> = Vec::new();
    let push = |d: Derived,
                derived: &mut Vec<Derived>,
                seen: &mut BTreeSet<Sequent>,
                outputs: &mut Vec<(Sequent, ProofTree)>| {
        if seen.insert(d.seq.clone()) {
            if d.proof.uses("Cut") {
                outputs.push((d.seq.clone(), d.proof.clone()));
            }
            derived.push(d);
        }
    };
    for a in &cfg.atoms {
        let s = Sequent::new(Structure::atom(a), Structure::atom(a));
        let proof = ProofTree { conclusion: s.clone(), rule: "Id".into(), children: vec![] };
        push(Derived { seq: s, proof, depth: 1 }, &mut derived, &mut seen, &mut outputs);
    }
    let axioms: Vec<usize> = (0..calc.rules.len())
        .filter(|&i| calc.rules[i].class == RuleClass::Axiom && calc.rules[i].name != "Id")
        .collect();
    for &i in &axioms {
        for _ in 0..2 {
            let mut b = Bindings::new();
            let r = &calc.rules[i];
            fill_free(&r.conclusion.ant, &mut b, &pool, &cfg.atoms, &mut rng);
            fill_free(&r.conclusion.suc, &mut b, &pool, &cfg.atoms, &mut rng);
            if let Some(s) = instantiate_seq(&r.conclusion, &b) {
                let proof = ProofTree { conclusion: s.clone(), rule: r.name.clone(), children: vec![] };
                push(Derived { seq: s, proof, depth: 1 }, &mut derived, &mut seen, &mut outputs);
            }
        }
    }
    if cfg.max_depth <= 1 {
        return derived.into_iter().map(|d| (d.seq, d.proof)).collect();
    }
    let mut orients: Vec<(usize, bool)> = Vec::new();
    for (i, r) in calc.rules.iter().enumerate() {
        if r.class == RuleClass::Axiom {
            continue;
        }
        let weight = if r.class == RuleClass::Cut { 6 } else { 1 };
        for _ in 0..weight {
            orients.push((i, false));
            if r.invertible {
                orients.push((i, true));
            }
        }
    }
    for _ in 0..cfg.attempts {
        if outputs.len() >= count {
            break;
        }
        let &(ri, inv) = orients.choose(&mut rng).expect("rules");
        let rule = &calc.rules[ri];
        let (prems, concl) = rule.oriented(inv).expect("orientation");
        let mut b = Bindings::new();
        let mut kids: Vec<usize> = Vec::new();
        let mut ok = true;
        for p in &prems {
            // Probe a bounded random sample of earlier sequents.
            let n = derived.len();
            let pick = rand::seq::index::sample(&mut rng, n, n.min(SAMPLE)).into_iter().find(|&k| {
                let mut b2 = b.clone();
                derived[k].depth < cfg.max_depth && match_seq(p, &derived[k].seq, &mut b2)
            });
            match pick {
                Some(k) => {
                    match_seq(p, &derived[k].seq, &mut b);
                    kids.push(k);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        fill_free(&concl.ant, &mut b, &pool, &cfg.atoms, &mut rng);
        fill_free(&concl.suc, &mut b, &pool, &cfg.atoms, &mut rng);
        let Some(s) = instantiate_seq(concl, &b) else { continue };
        if !crate::syntax::sequent_well_sorted(&s, sig) || s.complexity() > 12 {
            continue;
        }
        let depth = 1 + kids.iter().map(|&k| derived[k].depth).max().unwrap_or(0);
        let proof = ProofTree {
            conclusion: s.clone(),
            rule: calc.rule_label(ri, inv),
            children: kids.iter().map(|&k| derived[k].proof.clone()).collect(),
        };
        push(Derived { seq: s, proof, depth }, &mut derived, &mut seen, &mut outputs);
    }
    outputs.truncate(count);
    outputs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{Connective, Tone::*};
    use crate::syntax::parse_sequent;

    fn lattice() -> Calculus {
        Calculus::lattice_only(Signature::empty())
    }

    fn seq(t: &str) -> Sequent {
        parse_sequent(t, &Signature::empty()).unwrap()
    }

    #[test]
    fn identity_closure_is_a_singleton() {
        let c = backward_closure(&seq("p => p"), &lattice(), 100);
        assert_eq!(c.len(), 1);
        assert!(c.complete);
    }

    #[test]
    fn meet_commutes() {
        let c = backward_closure(&seq("p & q => q & p"), &lattice(), 100);
        for s in ["p & q => q", "p & q => p", "q => q", "p => p"] {
            assert!(c.members.contains(&seq(s)), "{s}");
        }
        assert!(derive_cutfree(&seq("p & q => q & p"), &lattice(), 100).is_derivable());
    }

    #[test]
    fn and_left_proof_shape() {
        match derive_cutfree(&seq("p & q => p"), &lattice(), 100) {
            DeriveResult::Derivable(t) => {
                assert_eq!(t.rule, "AndL1");
                assert_eq!(t.children[0].rule, "Id");
                t.check(&lattice()).unwrap();
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distributivity_fails_in_lattices() {
        let r = derive_cutfree(&seq("p & (q | r) => p & q | p & r"), &lattice(), 1000);
        assert!(matches!(r, DeriveResult::NotDerivable));
    }

    #[test]
    fn star_parity() {
        let sig = Signature::new([
            Connective::new("notF", Sort::F, vec![Dual]),
            Connective::new("notG", Sort::G, vec![Dual]),
            Connective::new("zero", Sort::G, vec![]),
        ])
        .unwrap();
        let q = Quotient::ortho(&[], &sig, Star { f: "notF".into(), g: "notG".into(), unit: "zero".into() });
        let p = Structure::atom("p");
        let mut s = p.clone();
        let mut sort = Sort::F;
        let mut powers = vec![];
        for _ in 0..5 {
            let name = if sort == Sort::F { "notG" } else { "notF" };
            s = Structure::sapp(sort.flip(), name, vec![s]);
            sort = sort.flip();
            powers.push(q.canonicalize(&s));
        }
        assert_eq!(powers[1], p);
        assert_eq!(powers[4], powers[0]);
        assert_eq!(q.canonicalize(&powers[0]), powers[0]);
    }
}
