//! The display calculus D.LE generated from a signature, rule schemas as
//! meta-structure patterns, bottom-up matching, and the analyticity checker.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{Signature, Sort, Tone};
use crate::syntax::{self, Formula, ParseError, Raw, Sequent, Structure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetaKind {
    Structure,
    Formula,
    Atom,
}

/// A metavariable with its sort and kind, as reported by [`RuleSchema::metavars`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaVar {
    pub name: String,
    pub sort: Option<Sort>,
    pub kind: MetaKind,
}

/// Meta-structure pattern. Formula-level nodes only occur in axiom and
/// introduction schemas (and are rejected in structural rules by C1).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Meta {
    /// Structure metavariable; `X..` are F-sort, `Y..` are G-sort.
    Var(String),
    /// Formula metavariable `phi..`.
    FVar(String),
    /// Atom metavariable (identity axiom).
    AVar(String),
    Const(Formula),
    Meet(Box<Meta>, Box<Meta>),
    Join(Box<Meta>, Box<Meta>),
    App(String, Vec<Meta>),
    SApp(Sort, String, Vec<Meta>),
}

impl Meta {
    fn var(n: &str) -> Meta {
        Meta::Var(n.to_string())
    }

    fn fvar(n: &str) -> Meta {
        Meta::FVar(n.to_string())
    }

    pub fn is_formula_node(&self) -> bool {
        !matches!(self, Meta::Var(_) | Meta::SApp(..))
    }

    /// Connective nodes, counted as in [`syntax::complexity`].
    pub fn size(&self) -> usize {
        match self {
            Meta::Var(_) | Meta::FVar(_) | Meta::AVar(_) => 0,
            Meta::Const(f) => f.complexity(),
            Meta::Meet(a, b) | Meta::Join(a, b) => 1 + a.size() + b.size(),
            Meta::App(_, xs) | Meta::SApp(_, _, xs) => 1 + xs.iter().map(Meta::size).sum::<usize>(),
        }
    }

    fn occurrences(&self, out: &mut BTreeMap<String, usize>) {
        match self {
            Meta::Var(v) | Meta::FVar(v) | Meta::AVar(v) => *out.entry(v.clone()).or_default() += 1,
            Meta::Const(_) => {}
            Meta::Meet(a, b) | Meta::Join(a, b) => {
                a.occurrences(out);
                b.occurrences(out);
            }
            Meta::App(_, xs) | Meta::SApp(_, _, xs) => xs.iter().for_each(|x| x.occurrences(out)),
        }
    }

    fn contains_formula(&self) -> bool {
        match self {
            Meta::Var(_) => false,
            Meta::SApp(_, _, xs) => xs.iter().any(Meta::contains_formula),
            _ => true,
        }
    }

    /// Polarities (`true` = precedent) of structure-variable occurrences.
    fn polarities(&self, sort: Sort, sig: &Signature, out: &mut Vec<(String, Sort)>) {
        match self {
            Meta::Var(v) => out.push((v.clone(), sort)),
            Meta::SApp(_, name, xs) => {
                if let Some(c) = sig.get(name) {
                    for (i, x) in xs.iter().enumerate() {
                        x.polarities(sort.under(c.order_type.get(i)), sig, out);
                    }
                }
            }
            _ => {}
        }
    }
}

impl fmt::Display for Meta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Meta::Var(v) | Meta::FVar(v) | Meta::AVar(v) => f.write_str(v),
            Meta::Const(c) => write!(f, "{c}"),
            Meta::Meet(a, b) => write!(f, "({a} & {b})"),
            Meta::Join(a, b) => write!(f, "({a} | {b})"),
            Meta::App(n, xs) | Meta::SApp(_, n, xs) => {
                if let Meta::SApp(s, ..) = self {
                    write!(f, "{s}.")?;
                }
                write!(f, "{n}(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeqPat {
    pub ant: Meta,
    pub suc: Meta,
}

impl SeqPat {
    pub fn new(ant: Meta, suc: Meta) -> Self {
        SeqPat { ant, suc }
    }

    pub fn size(&self) -> usize {
        self.ant.size() + self.suc.size()
    }

    pub fn occurrences(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        self.ant.occurrences(&mut m);
        self.suc.occurrences(&mut m);
        m
    }
}

impl fmt::Display for SeqPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.ant, self.suc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleClass {
    Axiom,
    Display,
    Intro,
    Structural,
    Cut,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RuleSchema {
    pub name: String,
    pub premises: Vec<SeqPat>,
    pub conclusion: SeqPat,
    pub class: RuleClass,
    pub invertible: bool,
}

impl RuleSchema {
    fn new(name: impl Into<String>, class: RuleClass, premises: Vec<SeqPat>, conclusion: SeqPat) -> Self {
        RuleSchema { name: name.into(), premises, conclusion, class, invertible: false }
    }

    fn invertible(mut self) -> Self {
        self.invertible = true;
        self
    }

    /// The rule read in the given direction; the inverse of an invertible
    /// single-premise rule swaps premise and conclusion.
    pub fn oriented(&self, inverse: bool) -> Option<(Vec<&SeqPat>, &SeqPat)> {
        if !inverse {
            Some((self.premises.iter().collect(), &self.conclusion))
        } else if self.invertible && self.premises.len() == 1 {
            Some((vec![&self.conclusion], &self.premises[0]))
        } else {
            None
        }
    }

    pub fn metavars(&self) -> Vec<MetaVar> {
        let mut names = BTreeSet::new();
        for p in self.premises.iter().chain(std::iter::once(&self.conclusion)) {
            names.extend(p.occurrences().into_keys());
        }
        let mut kinds = HashMap::new();
        fn walk(m: &Meta, k: &mut HashMap<String, MetaKind>) {
            match m {
                Meta::Var(v) => {
                    k.insert(v.clone(), MetaKind::Structure);
                }
                Meta::FVar(v) => {
                    k.insert(v.clone(), MetaKind::Formula);
                }
                Meta::AVar(v) => {
                    k.insert(v.clone(), MetaKind::Atom);
                }
                Meta::Const(_) => {}
                Meta::Meet(a, b) | Meta::Join(a, b) => {
                    walk(a, k);
                    walk(b, k);
                }
                Meta::App(_, xs) | Meta::SApp(_, _, xs) => xs.iter().for_each(|x| walk(x, k)),
            }
        }
        for p in self.premises.iter().chain(std::iter::once(&self.conclusion)) {
            walk(&p.ant, &mut kinds);
            walk(&p.suc, &mut kinds);
        }
        names
            .into_iter()
            .map(|n| {
                let kind = kinds[&n];
                let sort = match kind {
                    MetaKind::Structure => var_sort(&n),
                    _ => None,
                };
                MetaVar { name: n, sort, kind }
            })
            .collect()
    }
}

impl fmt::Display for RuleSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prem: Vec<String> = self.premises.iter().map(|p| p.to_string()).collect();
        let bar = if self.invertible { "====" } else { "----" };
        write!(f, "{}: {} {bar} {}", self.name, prem.join(" ; "), self.conclusion)
    }
}

pub(crate) fn var_sort(name: &str) -> Option<Sort> {
    let rest = |p: &str| name.strip_prefix(p).is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()));
    if rest("X") {
        Some(Sort::F)
    } else if rest("Y") {
        Some(Sort::G)
    } else {
        None
    }
}

fn is_formula_var(name: &str) -> bool {
    ["phi", "psi"].iter().any(|p| name.strip_prefix(p).is_some_and(|d| d.chars().all(|c| c.is_ascii_digit())))
}

// ------------------------------------------------------------ generation

fn seq(a: Meta, b: Meta) -> SeqPat {
    SeqPat::new(a, b)
}

/// Metavariables for the arguments of `c`: `X<j+1>` or `Y<j+1>` by argument sort.
fn arg_vars(sig: &Signature, name: &str) -> Vec<Meta> {
    let c = sig.get(name).expect("connective");
    (0..c.arity)
        .map(|j| match c.arg_sort(j) {
            Sort::F => Meta::var(&format!("X{}", j + 1)),
            Sort::G => Meta::var(&format!("Y{}", j + 1)),
        })
        .collect()
}

fn fresh(sort: Sort, n: usize) -> Meta {
    match sort {
        Sort::F => Meta::var(&format!("X{n}")),
        Sort::G => Meta::var(&format!("Y{n}")),
    }
}

/// The rules of D.LE for `sig` (the expansion is computed here): axioms, the
/// lattice rules, introduction rules, display rules, and Cut last.
pub fn base_rules(sig: &Signature) -> Vec<RuleSchema> {
    use RuleClass::*;
    let sig = sig.expand();
    let (x, y) = (Meta::var("X1"), Meta::var("Y1"));
    let (phi, psi) = (Meta::fvar("phi1"), Meta::fvar("psi1"));
    let meet = Meta::Meet(Box::new(phi.clone()), Box::new(psi.clone()));
    let join = Meta::Join(Box::new(phi.clone()), Box::new(psi.clone()));
    let mut rules = vec![
        RuleSchema::new("Id", Axiom, vec![], seq(Meta::AVar("p".into()), Meta::AVar("p".into()))),
        RuleSchema::new("Bot", Axiom, vec![], seq(Meta::Const(Formula::Bot), y.clone())),
        RuleSchema::new("Top", Axiom, vec![], seq(x.clone(), Meta::Const(Formula::Top))),
        RuleSchema::new("AndL1", Intro, vec![seq(phi.clone(), y.clone())], seq(meet.clone(), y.clone())),
        RuleSchema::new("AndL2", Intro, vec![seq(psi.clone(), y.clone())], seq(meet.clone(), y.clone())),
        RuleSchema::new("OrR1", Intro, vec![seq(x.clone(), phi.clone())], seq(x.clone(), join.clone())),
        RuleSchema::new("OrR2", Intro, vec![seq(x.clone(), psi.clone())], seq(x.clone(), join.clone())),
        RuleSchema::new(
            "AndR",
            Intro,
            vec![seq(x.clone(), phi.clone()), seq(x.clone(), psi.clone())],
            seq(x.clone(), meet),
        ),
        RuleSchema::new(
            "OrL",
            Intro,
            vec![seq(phi.clone(), y.clone()), seq(psi.clone(), y.clone())],
            seq(join, y.clone()),
        ),
    ];
    let base: Vec<_> = sig.base().cloned().collect();
    for c in &base {
        let n = c.arity;
        let phis: Vec<Meta> = (1..=n).map(|j| Meta::fvar(&format!("phi{j}"))).collect();
        let args = arg_vars(&sig, &c.name);
        let op = Meta::App(c.name.clone(), phis.clone());
        let st_phis = Meta::SApp(c.family, c.name.clone(), phis.clone());
        let st_args = Meta::SApp(c.family, c.name.clone(), args.clone());
        let side_prem = |j: usize| -> SeqPat {
            // premise relating the j-th structure argument to phi_j
            match c.arg_sort(j) {
                Sort::F => seq(args[j].clone(), phis[j].clone()),
                Sort::G => seq(phis[j].clone(), args[j].clone()),
            }
        };
        let name = &c.name;
        match c.family {
            Sort::F => {
                let yk = fresh(Sort::G, n + 1);
                rules.push(RuleSchema::new(
                    format!("{name}_L"),
                    Intro,
                    vec![seq(st_phis.clone(), yk.clone())],
                    seq(op.clone(), yk.clone()),
                ));
                rules.push(RuleSchema::new(
                    format!("{name}_R"),
                    if n == 0 { Axiom } else { Intro },
                    (0..n).map(side_prem).collect(),
                    seq(st_args.clone(), op.clone()),
                ));
            }
            Sort::G => {
                let xk = fresh(Sort::F, n + 1);
                rules.push(RuleSchema::new(
                    format!("{name}_L"),
                    Intro,
                    vec![seq(xk.clone(), st_phis.clone())],
                    seq(xk.clone(), op.clone()),
                ));
                rules.push(RuleSchema::new(
                    format!("{name}_R"),
                    if n == 0 { Axiom } else { Intro },
                    (0..n).map(side_prem).collect(),
                    seq(op.clone(), st_args.clone()),
                ));
            }
        }
    }
    for c in &base {
        let n = c.arity;
        let args = arg_vars(&sig, &c.name);
        for i in 0..n {
            let r = c.residual(i);
            let top_side = fresh(c.family.flip(), n + 1);
            let mut rargs = args.clone();
            rargs[i] = top_side.clone();
            let st = Meta::SApp(c.family, c.name.clone(), args.clone());
            let rst = Meta::SApp(r.family, r.name.clone(), rargs);
            let (top, bottom) = match (c.family, c.order_type.get(i)) {
                (Sort::F, Tone::One) => (seq(st, top_side), seq(args[i].clone(), rst)),
                (Sort::F, Tone::Dual) => (seq(st, top_side), seq(rst, args[i].clone())),
                (Sort::G, Tone::One) => (seq(top_side, st), seq(rst, args[i].clone())),
                (Sort::G, Tone::Dual) => (seq(top_side, st), seq(args[i].clone(), rst)),
            };
            rules.push(RuleSchema::new(format!("disp_{}_{}", c.name, i + 1), Display, vec![top], bottom).invertible());
        }
    }
    rules.push(RuleSchema::new("Cut", Cut, vec![seq(x.clone(), phi.clone()), seq(phi, y.clone())], seq(x, y)));
    rules
}

// ------------------------------------------------------------ identification

/// Identifies a residual structural connective with another connective of the
/// same family: `residual(a_1..a_n)` equals `target(a_perm[0], .., a_perm[n-1])`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alias {
    pub residual: String,
    pub target: String,
    #[serde(default)]
    pub perm: Vec<usize>,
}

impl Alias {
    pub fn new(residual: &str, target: &str, perm: &[usize]) -> Self {
        Alias { residual: residual.into(), target: target.into(), perm: perm.to_vec() }
    }

    pub fn permutation(&self, arity: usize) -> Vec<usize> {
        if self.perm.is_empty() {
            (0..arity).collect()
        } else {
            self.perm.clone()
        }
    }

    pub fn check(&self, sig: &Signature) -> Result<(), String> {
        let sig = sig.expand();
        let r = sig.get(&self.residual).ok_or(format!("unknown connective {}", self.residual))?;
        let t = sig.get(&self.target).ok_or(format!("unknown connective {}", self.target))?;
        let perm = self.permutation(r.arity);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        if r.family != t.family || r.arity != t.arity || sorted != (0..r.arity).collect::<Vec<_>>() {
            return Err(format!("alias {} -> {}: family, arity or permutation mismatch", self.residual, self.target));
        }
        for (k, &j) in perm.iter().enumerate() {
            if t.arg_sort(k) != r.arg_sort(j) {
                return Err(format!("alias {} -> {}: argument sorts disagree", self.residual, self.target));
            }
        }
        Ok(())
    }

    /// The invertible structural rule expressing the identification.
    pub fn rule(&self, sig: &Signature) -> RuleSchema {
        let sig = sig.expand();
        let r = sig.get(&self.residual).expect("checked alias");
        let args = arg_vars(&sig, &r.name);
        let perm = self.permutation(r.arity);
        let targs = perm.iter().map(|&j| args[j].clone()).collect();
        let lhs = Meta::SApp(r.family, r.name.clone(), args);
        let rhs = Meta::SApp(r.family, self.target.clone(), targs);
        let other = fresh(r.family.flip(), r.arity + 1);
        let (p, c) = match r.family {
            Sort::F => (seq(lhs, other.clone()), seq(rhs, other)),
            Sort::G => (seq(other.clone(), lhs), seq(other, rhs)),
        };
        RuleSchema::new(format!("id_{}", self.residual), RuleClass::Structural, vec![p], c).invertible()
    }
}

// ------------------------------------------------------------ matching

pub type Bindings = HashMap<String, Structure>;

fn bind(b: &mut Bindings, v: &str, s: Structure) -> bool {
    match b.get(v) {
        Some(old) => *old == s,
        None => {
            b.insert(v.to_string(), s);
            true
        }
    }
}

fn match_formula(m: &Meta, f: &Formula, b: &mut Bindings) -> bool {
    match (m, f) {
        (Meta::Var(v) | Meta::FVar(v), _) => bind(b, v, Structure::Fml(f.clone())),
        (Meta::AVar(v), Formula::Atom(_)) => bind(b, v, Structure::Fml(f.clone())),
        (Meta::Const(c), _) => c == f,
        (Meta::Meet(x, y), Formula::Meet(a, c)) | (Meta::Join(x, y), Formula::Join(a, c)) => {
            match_formula(x, a, b) && match_formula(y, c, b)
        }
        (Meta::App(n, xs), Formula::App(m, ys)) => {
            n == m && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_formula(x, y, b))
        }
        _ => false,
    }
}

pub fn match_meta(m: &Meta, s: &Structure, b: &mut Bindings) -> bool {
    match (m, s) {
        (Meta::Var(v), _) => bind(b, v, s.clone()),
        (Meta::SApp(so, n, xs), Structure::SApp { sort, name, args }) => {
            so == sort && n == name && xs.len() == args.len() && xs.iter().zip(args).all(|(x, a)| match_meta(x, a, b))
        }
        (Meta::SApp(..), Structure::Fml(_)) => false,
        (_, Structure::Fml(f)) => match_formula(m, f, b),
        _ => false,
    }
}

fn inst_formula(m: &Meta, b: &Bindings) -> Option<Formula> {
    Some(match m {
        Meta::Var(v) | Meta::FVar(v) | Meta::AVar(v) => b.get(v)?.as_formula()?.clone(),
        Meta::Const(c) => c.clone(),
        Meta::Meet(x, y) => Formula::meet(inst_formula(x, b)?, inst_formula(y, b)?),
        Meta::Join(x, y) => Formula::join(inst_formula(x, b)?, inst_formula(y, b)?),
        Meta::App(n, xs) => Formula::App(n.clone(), xs.iter().map(|x| inst_formula(x, b)).collect::<Option<_>>()?),
        Meta::SApp(..) => return None,
    })
}

pub fn instantiate(m: &Meta, b: &Bindings) -> Option<Structure> {
    match m {
        Meta::Var(v) | Meta::FVar(v) | Meta::AVar(v) => b.get(v).cloned(),
        Meta::SApp(so, n, xs) => Some(Structure::SApp {
            sort: *so,
            name: n.clone(),
            args: xs.iter().map(|x| instantiate(x, b)).collect::<Option<_>>()?,
        }),
        other => inst_formula(other, b).map(Structure::Fml),
    }
}

pub fn instantiate_seq(p: &SeqPat, b: &Bindings) -> Option<Sequent> {
    Some(Sequent::new(instantiate(&p.ant, b)?, instantiate(&p.suc, b)?))
}

pub fn match_seq(p: &SeqPat, s: &Sequent, b: &mut Bindings) -> bool {
    match_meta(&p.ant, &s.ant, b) && match_meta(&p.suc, &s.suc, b)
}

/// Bottom-up application of one orientation of a rule.
pub fn match_oriented(rule: &RuleSchema, inverse: bool, goal: &Sequent) -> Vec<Vec<Sequent>> {
    let Some((prems, concl)) = rule.oriented(inverse) else {
        return vec![];
    };
    let mut b = Bindings::new();
    if !match_seq(concl, goal, &mut b) {
        return vec![];
    }
    match prems.iter().map(|p| instantiate_seq(p, &b)).collect::<Option<Vec<_>>>() {
        Some(ps) => vec![ps],
        None => vec![],
    }
}

/// All premise lists under which `goal` is a conclusion of `rule`. Conclusion
/// patterns are matched at the root, so there is at most one match.
pub fn match_and_instantiate(rule: &RuleSchema, goal: &Sequent) -> Vec<Vec<Sequent>> {
    if rule.class == RuleClass::Cut {
        return vec![];
    }
    match_oriented(rule, false, goal)
}

// ------------------------------------------------------------ analyticity

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    HoldsByShape,
    NotApplicable,
    Fail(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalyticityReport {
    pub rule: String,
    pub verdicts: Vec<(Condition, Verdict)>,
}

impl AnalyticityReport {
    pub fn accepted(&self) -> bool {
        self.verdicts.iter().all(|(_, v)| !matches!(v, Verdict::Fail(_)))
    }

    pub fn failed(&self) -> Vec<Condition> {
        self.verdicts.iter().filter(|(_, v)| matches!(v, Verdict::Fail(_))).map(|(c, _)| *c).collect()
    }
}

impl fmt::Display for AnalyticityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rule {}: {}", self.rule, if self.accepted() { "analytic" } else { "REJECTED" })?;
        for (c, v) in &self.verdicts {
            let text = match v {
                Verdict::Pass => "pass".to_string(),
                Verdict::HoldsByShape => "holds by shape".to_string(),
                Verdict::NotApplicable => "not applicable".to_string(),
                Verdict::Fail(w) => format!("FAIL: {w}"),
            };
            writeln!(f, "  {c:?}: {text}")?;
        }
        Ok(())
    }
}

/// Checks conditions C1-C7 on a structural rule (both directions when invertible).
pub fn check_analytic(rule: &RuleSchema, sig: &Signature) -> AnalyticityReport {
    let sig = sig.expand();
    let mut verdicts = Vec::new();
    let orientations: Vec<(Vec<&SeqPat>, &SeqPat)> =
        [false, true].iter().filter_map(|&inv| rule.oriented(inv)).collect();

    // C1: premise variables occur in the conclusion; no formulas anywhere.
    let mut c1 = Vec::new();
    for p in rule.premises.iter().chain(std::iter::once(&rule.conclusion)) {
        if p.ant.contains_formula() || p.suc.contains_formula() {
            c1.push(format!("formula occurs in `{p}`"));
        }
    }
    for (prems, concl) in &orientations {
        let cv = concl.occurrences();
        for p in prems {
            for v in p.occurrences().keys() {
                if !cv.contains_key(v) {
                    c1.push(format!("{v} occurs in premise `{p}` but not in conclusion `{concl}`"));
                }
            }
        }
    }
    verdicts.push((Condition::C1, if c1.is_empty() { Verdict::Pass } else { Verdict::Fail(c1.join("; ")) }));
    verdicts.push((Condition::C2, Verdict::HoldsByShape));

    // C3: each variable at most once in the conclusion.
    let mut c3 = Vec::new();
    for (_, concl) in &orientations {
        for (v, n) in concl.occurrences() {
            if n > 1 {
                c3.push(format!("{v} occurs {n} times in conclusion `{concl}`"));
            }
        }
    }
    verdicts.push((Condition::C3, if c3.is_empty() { Verdict::Pass } else { Verdict::Fail(c3.join("; ")) }));

    // C4: polarity of every variable agrees across all sequents of the rule.
    let mut pol: BTreeMap<String, (Sort, String)> = BTreeMap::new();
    let mut c4 = Vec::new();
    for p in rule.premises.iter().chain(std::iter::once(&rule.conclusion)) {
        let mut occ = Vec::new();
        p.ant.polarities(Sort::F, &sig, &mut occ);
        p.suc.polarities(Sort::G, &sig, &mut occ);
        for (v, s) in occ {
            match pol.get(&v) {
                Some((s0, where0)) if *s0 != s => {
                    c4.push(format!("{v} is {} in `{where0}` but {} in `{p}`", side_name(*s0), side_name(s)))
                }
                Some(_) => {}
                None => {
                    pol.insert(v, (s, p.to_string()));
                }
            }
        }
    }
    verdicts.push((Condition::C4, if c4.is_empty() { Verdict::Pass } else { Verdict::Fail(c4.join("; ")) }));
    verdicts.push((Condition::C5, Verdict::NotApplicable));
    verdicts.push((Condition::C6, Verdict::HoldsByShape));
    verdicts.push((Condition::C7, Verdict::HoldsByShape));
    AnalyticityReport { rule: rule.name.clone(), verdicts }
}

fn side_name(s: Sort) -> &'static str {
    match s {
        Sort::F => "precedent",
        Sort::G => "succedent",
    }
}

// ------------------------------------------------------------ rule files

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule `{rule}`: {err}")]
    Parse { rule: String, err: ParseError },
    #[error("rule `{0}` is not analytic:\n{1}")]
    NotAnalytic(String, AnalyticityReport),
    #[error("rule file: {0}")]
    Format(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleSpec {
    pub name: String,
    pub premises: Vec<String>,
    pub conclusion: String,
    #[serde(default)]
    pub invertible: bool,
}

fn raw_meta(raw: &Raw, sig: &Signature, expected: Sort) -> Result<Meta, ParseError> {
    match raw {
        Raw::SApp(pos, sort, name, args) => {
            let c = syntax::structural(sig, *pos, name, *sort, expected, args.len())?;
            let args =
                args.iter().enumerate().map(|(i, a)| raw_meta(a, sig, c.arg_sort(i))).collect::<Result<_, _>>()?;
            Ok(Meta::SApp(*sort, c.name.clone(), args))
        }
        Raw::Name(pos, w) => match var_sort(w) {
            Some(s) if s == expected => Ok(Meta::Var(w.clone())),
            Some(s) => Err(ParseError::Sort {
                pos: *pos,
                msg: format!("{s}-sort metavariable {w} where a {expected}-structure is required"),
            }),
            None => raw_meta_formula(raw, sig),
        },
        other => raw_meta_formula(other, sig),
    }
}

fn raw_meta_formula(raw: &Raw, sig: &Signature) -> Result<Meta, ParseError> {
    match raw {
        Raw::Name(_, w) if is_formula_var(w) => Ok(Meta::FVar(w.clone())),
        Raw::Name(pos, w) if var_sort(w).is_some() => {
            Err(ParseError::Sort { pos: *pos, msg: format!("structure metavariable {w} inside a formula") })
        }
        Raw::App(pos, name, args) => {
            let c = syntax::operational(sig, *pos, name, args.len())?;
            Ok(Meta::App(c.name.clone(), args.iter().map(|a| raw_meta_formula(a, sig)).collect::<Result<_, _>>()?))
        }
        Raw::Meet(a, b) => Ok(Meta::Meet(Box::new(raw_meta_formula(a, sig)?), Box::new(raw_meta_formula(b, sig)?))),
        Raw::Join(a, b) => Ok(Meta::Join(Box::new(raw_meta_formula(a, sig)?), Box::new(raw_meta_formula(b, sig)?))),
        other => Ok(Meta::Const(syntax::raw_formula(other, sig)?)),
    }
}

pub fn parse_pattern(text: &str, sig: &Signature) -> Result<SeqPat, ParseError> {
    let sig = sig.expand();
    let (a, b) = syntax::parse_raw_sequent(text)?;
    Ok(SeqPat::new(raw_meta(&a, &sig, Sort::F)?, raw_meta(&b, &sig, Sort::G)?))
}

impl RuleSpec {
    pub fn to_schema(&self, sig: &Signature) -> Result<RuleSchema, RuleError> {
        let err = |e| RuleError::Parse { rule: self.name.clone(), err: e };
        let premises = self.premises.iter().map(|p| parse_pattern(p, sig)).collect::<Result<_, _>>().map_err(err)?;
        let conclusion = parse_pattern(&self.conclusion, sig).map_err(err)?;
        if self.invertible && self.premises.len() != 1 {
            return Err(RuleError::Format(format!("rule `{}`: invertible rules need one premise", self.name)));
        }
        Ok(RuleSchema {
            name: self.name.clone(),
            premises,
            conclusion,
            class: RuleClass::Structural,
            invertible: self.invertible,
        })
    }
}

/// Parses a JSON list of rules. Structural rules go through
/// [`check_analytic`] and are rejected on failure unless `unsafe_ok`.
pub fn load_rules(text: &str, sig: &Signature, unsafe_ok: bool) -> Result<Vec<RuleSchema>, RuleError> {
    let specs: Vec<RuleSpec> = serde_json::from_str(text).map_err(|e| RuleError::Format(e.to_string()))?;
    specs_to_rules(&specs, sig, unsafe_ok)
}

pub fn specs_to_rules(specs: &[RuleSpec], sig: &Signature, unsafe_ok: bool) -> Result<Vec<RuleSchema>, RuleError> {
    let mut out = Vec::new();
    for spec in specs {
        let r = spec.to_schema(sig)?;
        let report = check_analytic(&r, sig);
        if !report.accepted() && !unsafe_ok {
            return Err(RuleError::NotAnalytic(r.name.clone(), report));
        }
        out.push(r);
    }
    Ok(out)
}

/// Bottom-up complexity never grows: for every premise, connective count and
/// each variable's occurrence count are bounded by the conclusion's.
pub fn complexity_non_increasing(rule: &RuleSchema) -> bool {
    [false, true].iter().filter_map(|&inv| rule.oriented(inv)).all(|(prems, concl)| {
        let cv = concl.occurrences();
        prems
            .iter()
            .all(|p| p.size() <= concl.size() && p.occurrences().iter().all(|(v, n)| cv.get(v).is_some_and(|m| n <= m)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{Connective, Tone::*};
    use crate::syntax::parse_sequent;

    fn fl() -> Signature {
        Signature::new([
            Connective::new("e", Sort::F, vec![]),
            Connective::new("circ", Sort::F, vec![One, One]),
            Connective::new("bslash", Sort::G, vec![Dual, One]),
            Connective::new("slash", Sort::G, vec![One, Dual]),
        ])
        .unwrap()
    }

    fn names(rules: &[RuleSchema]) -> Vec<&str> {
        rules.iter().map(|r| r.name.as_str()).collect()
    }

    #[test]
    fn empty_signature_rules() {
        let rules = base_rules(&Signature::empty());
        assert_eq!(names(&rules), vec!["Id", "Bot", "Top", "AndL1", "AndL2", "OrR1", "OrR2", "AndR", "OrL", "Cut"]);
    }

    #[test]
    fn product_display_pair() {
        let rules = base_rules(&fl());
        let d = rules.iter().find(|r| r.name == "disp_circ_1").unwrap();
        assert!(d.invertible);
        assert_eq!(d.premises[0].to_string(), "F.circ(X1, X2) => Y3");
        assert_eq!(d.conclusion.to_string(), "X1 => G.circ.r1(Y3, X2)");
    }

    #[test]
    fn negation_right_rule_reverses_polarity() {
        let sig = Signature::new([Connective::new("notF", Sort::F, vec![Dual])]).unwrap();
        let rules = base_rules(&sig);
        let r = rules.iter().find(|r| r.name == "notF_R").unwrap();
        assert_eq!(r.premises[0].to_string(), "phi1 => Y1");
        assert_eq!(r.conclusion.to_string(), "F.notF(Y1) => notF(phi1)");
    }

    #[test]
    fn and_left_matching() {
        let rules = base_rules(&Signature::empty());
        let goal = parse_sequent("p & q => q", &Signature::empty()).unwrap();
        let r = rules.iter().find(|r| r.name == "AndL2").unwrap();
        let ps = match_and_instantiate(r, &goal);
        assert_eq!(ps, vec![vec![parse_sequent("q => q", &Signature::empty()).unwrap()]]);
    }

    #[test]
    fn identity_needs_equal_atoms() {
        let rules = base_rules(&Signature::empty());
        let id = &rules[0];
        let e = Signature::empty();
        assert_eq!(match_and_instantiate(id, &parse_sequent("p => p", &e).unwrap()), vec![vec![]]);
        assert!(match_and_instantiate(id, &parse_sequent("p => q", &e).unwrap()).is_empty());
        assert!(match_and_instantiate(id, &parse_sequent("p & q => p & q", &e).unwrap()).is_empty());
    }

    #[test]
    fn exchange_matching() {
        let spec = RuleSpec {
            name: "exchange".into(),
            premises: vec!["F.circ(X1, X2) => Y1".into()],
            conclusion: "F.circ(X2, X1) => Y1".into(),
            invertible: false,
        };
        let r = spec.to_schema(&fl()).unwrap();
        let goal = parse_sequent("F.circ(p,q) => r", &fl()).unwrap();
        assert_eq!(match_and_instantiate(&r, &goal), vec![vec![parse_sequent("F.circ(q,p) => r", &fl()).unwrap()]]);
    }

    #[test]
    fn analyticity_examples() {
        let sig = fl();
        let good = RuleSpec {
            name: "ex43".into(),
            premises: vec!["F.circ(X1, X3) => Y2".into()],
            conclusion: "F.circ(X1, X2) => Y2".into(),
            invertible: false,
        };
        // premise variable X3 is absent from the conclusion
        let r = good.to_schema(&sig).unwrap();
        assert_eq!(check_analytic(&r, &sig).failed(), vec![Condition::C1]);
        let dup = RuleSpec {
            name: "dup".into(),
            premises: vec!["X1 => Y1".into()],
            conclusion: "F.circ(X1, X1) => Y1".into(),
            invertible: false,
        };
        let r = dup.to_schema(&sig).unwrap();
        assert_eq!(check_analytic(&r, &sig).failed(), vec![Condition::C3]);
    }

    #[test]
    fn sort_errors_in_patterns() {
        assert!(matches!(parse_pattern("Y1 => Y2", &fl()), Err(ParseError::Sort { pos: 0, .. })));
        assert!(parse_pattern("F.circ(X1, X2) => G.bslash(X1, Y1)", &fl()).is_ok());
    }

    #[test]
    fn certificates() {
        let rules = base_rules(&fl());
        for r in rules.iter().filter(|r| r.class != RuleClass::Cut) {
            assert!(complexity_non_increasing(r), "{r}");
        }
        let contraction = RuleSpec {
            name: "contraction".into(),
            premises: vec!["F.circ(X1, X1) => Y1".into()],
            conclusion: "X1 => Y1".into(),
            invertible: false,
        }
        .to_schema(&fl())
        .unwrap();
        assert!(!complexity_non_increasing(&contraction));
    }

    #[test]
    fn aliases_produce_rules() {
        let a = Alias::new("bslash.l1", "slash", &[1, 0]);
        a.check(&fl()).unwrap();
        assert_eq!(a.rule(&fl()).to_string(), "id_bslash.l1: X3 => G.bslash.l1(X1, Y2) ==== X3 => G.slash(Y2, X1)");
        assert!(Alias::new("bslash.l1", "slash", &[]).check(&fl()).is_err());
    }
}
