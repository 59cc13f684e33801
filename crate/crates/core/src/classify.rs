//! Signed generation trees and analytic inductive inequalities.
//!
//! Witness search order: order types by binary counting over the variables
//! in first-occurrence order (bit set = `∂`, so all-`1` comes first), then
//! strict partial orders sorted by number of pairs and lexicographically by
//! their sorted pair lists. The first pair that works is returned.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::signature::{Signature, Sort, Tone};
use crate::syntax::Formula;

/// Largest number of variables handled by [`find_witness`].
pub const MAX_VARS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn under(self, t: Tone) -> Sign {
        match t {
            Tone::One => self,
            Tone::Dual => self.flip(),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum NodeClass {
    DeltaAdjoint,
    Sra,
    Slr,
    Srr,
    Leaf,
}

impl NodeClass {
    pub fn is_skeleton(self) -> bool {
        matches!(self, NodeClass::DeltaAdjoint | NodeClass::Slr)
    }

    pub fn is_pia(self) -> bool {
        matches!(self, NodeClass::Sra | NodeClass::Srr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedNode {
    pub label: String,
    pub sign: Sign,
    pub class: NodeClass,
    /// Variable name for variable leaves.
    pub var: Option<String>,
    pub children: Vec<SignedNode>,
}

impl SignedNode {
    /// Every node, preorder.
    pub fn nodes(&self) -> Vec<&SignedNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.nodes());
        }
        out
    }

    /// Variable leaves below (and including) this node.
    pub fn var_leaves(&self) -> Vec<&SignedNode> {
        self.nodes().into_iter().filter(|n| n.var.is_some()).collect()
    }
}

impl fmt::Display for SignedNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign, self.label)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("unknown connective `{0}`")]
    UnknownConnective(String),
    #[error("{0} variables exceed the bound of {1}")]
    TooManyVariables(usize, usize),
    #[error("witness variables {found:?} do not match the inequality's {expected:?}")]
    VariableMismatch { expected: Vec<String>, found: Vec<String> },
}

/// Builds the signed generation tree of `term`.
pub fn signed_tree(term: &Formula, sign: Sign, sig: &Signature) -> Result<SignedNode, ClassifyError> {
    let leaf =
        |label: String, var: Option<String>| SignedNode { label, sign, class: NodeClass::Leaf, var, children: vec![] };
    Ok(match term {
        Formula::Atom(p) => leaf(p.clone(), Some(p.clone())),
        Formula::Top => leaf("T".into(), None),
        Formula::Bot => leaf("B".into(), None),
        Formula::Meet(a, b) | Formula::Join(a, b) => {
            let is_meet = matches!(term, Formula::Meet(..));
            let class = match (is_meet, sign) {
                (false, Sign::Plus) | (true, Sign::Minus) => NodeClass::DeltaAdjoint,
                _ => NodeClass::Sra,
            };
            SignedNode {
                label: if is_meet { "&" } else { "|" }.into(),
                sign,
                class,
                var: None,
                children: vec![signed_tree(a, sign, sig)?, signed_tree(b, sign, sig)?],
            }
        }
        Formula::App(name, args) => {
            let c = sig.resolve(name).ok_or_else(|| ClassifyError::UnknownConnective(name.clone()))?;
            if c.arity == 0 {
                return Ok(leaf(c.name.clone(), None));
            }
            let class = match (c.family, sign) {
                (Sort::F, Sign::Plus) | (Sort::G, Sign::Minus) => NodeClass::Slr,
                _ if c.arity == 1 => NodeClass::Sra,
                _ => NodeClass::Srr,
            };
            let children = args
                .iter()
                .enumerate()
                .map(|(i, a)| signed_tree(a, sign.under(c.order_type.get(i)), sig))
                .collect::<Result<_, _>>()?;
            SignedNode { label: c.name.clone(), sign, class, var: None, children }
        }
    })
}

/// An order type and a strict dependency order over named variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InductiveWitness {
    pub vars: Vec<String>,
    pub epsilon: Vec<Tone>,
    /// Pairs `(k, i)` meaning `vars[k] <Ω vars[i]`.
    pub omega: BTreeSet<(usize, usize)>,
}

impl InductiveWitness {
    /// Irreflexive and transitive.
    pub fn is_well_formed(&self) -> bool {
        let n = self.vars.len();
        self.epsilon.len() == n
            && self.omega.iter().all(|&(a, b)| a != b && a < n && b < n)
            && self
                .omega
                .iter()
                .all(|&(a, b)| self.omega.iter().filter(|&&(c, _)| c == b).all(|&(_, d)| self.omega.contains(&(a, d))))
    }
}

impl fmt::Display for InductiveWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eps: Vec<String> = self
            .vars
            .iter()
            .zip(&self.epsilon)
            .map(|(v, t)| format!("{v}:{}", if *t == Tone::One { "1" } else { "d" }))
            .collect();
        let om: Vec<String> = self.omega.iter().map(|&(a, b)| format!("{} < {}", self.vars[a], self.vars[b])).collect();
        write!(f, "epsilon = ({}), omega = {{{}}}", eps.join(", "), om.join(", "))
    }
}

/// Outcome of checking one witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    pub holds: bool,
    /// First violation found, when `holds` is false.
    pub diagnostic: Option<String>,
}

fn critical(leaf: &SignedNode, vars: &[String], eps: &[Tone]) -> bool {
    let Some(v) = &leaf.var else { return false };
    let i = vars.iter().position(|w| w == v).expect("variable listed");
    matches!((leaf.sign, eps[i]), (Sign::Plus, Tone::One) | (Sign::Minus, Tone::Dual))
}

fn path_text(path: &[&SignedNode], leaf: &SignedNode) -> String {
    path.iter().map(|n| n.to_string()).chain(std::iter::once(leaf.to_string())).collect::<Vec<_>>().join(" / ")
}

/// Conditions that do not depend on Ω, plus the Ω pairs required by the
/// SRR dependency condition.
fn requirements(tree: &SignedNode, vars: &[String], eps: &[Tone]) -> Result<BTreeSet<(usize, usize)>, String> {
    let mut need = BTreeSet::new();
    let mut path: Vec<(&SignedNode, usize)> = Vec::new();
    walk(tree, &mut path, &mut |path, leaf| {
        let nodes: Vec<&SignedNode> = path.iter().map(|(n, _)| *n).collect();
        // Good: read upwards from the leaf, PIA nodes first, then Skeleton nodes.
        let pia_run = nodes.iter().rev().take_while(|n| n.class.is_pia()).count();
        if !nodes[..nodes.len() - pia_run].iter().all(|n| n.class.is_skeleton()) {
            return Err(format!("branch {} is not good", path_text(&nodes, leaf)));
        }
        if !critical(leaf, vars, eps) {
            return Ok(());
        }
        let i = vars.iter().position(|w| Some(w) == leaf.var.as_ref()).expect("variable listed");
        for (node, j) in path.iter().filter(|(n, _)| n.class == NodeClass::Srr) {
            for (h, side) in node.children.iter().enumerate().filter(|(h, _)| h != j) {
                for l in side.var_leaves() {
                    if critical(l, vars, eps) {
                        return Err(format!(
                            "SRR node {node} on critical branch {}: side argument {} has critical leaf {l}",
                            path_text(&nodes, leaf),
                            h + 1
                        ));
                    }
                    let k = vars.iter().position(|w| Some(w) == l.var.as_ref()).expect("variable listed");
                    if k == i {
                        return Err(format!(
                            "SRR node {node} on critical branch {}: {} would depend on itself",
                            path_text(&nodes, leaf),
                            vars[i]
                        ));
                    }
                    need.insert((k, i));
                }
            }
        }
        Ok(())
    })?;
    Ok(need)
}

fn walk<'a>(
    node: &'a SignedNode,
    path: &mut Vec<(&'a SignedNode, usize)>,
    visit: &mut impl FnMut(&[(&'a SignedNode, usize)], &'a SignedNode) -> Result<(), String>,
) -> Result<(), String> {
    if node.children.is_empty() {
        return visit(path, node);
    }
    for (j, c) in node.children.iter().enumerate() {
        path.push((node, j));
        walk(c, path, visit)?;
        path.pop();
    }
    Ok(())
}

/// Variables in first-occurrence order, left side first.
pub fn variables(ineq: &(Formula, Formula)) -> Vec<String> {
    let mut v = Vec::new();
    ineq.0.atoms_in_order(&mut v);
    ineq.1.atoms_in_order(&mut v);
    let mut seen = BTreeSet::new();
    v.retain(|x| seen.insert(x.clone()));
    v
}

fn trees(ineq: &(Formula, Formula), sig: &Signature) -> Result<[SignedNode; 2], ClassifyError> {
    Ok([signed_tree(&ineq.0, Sign::Plus, sig)?, signed_tree(&ineq.1, Sign::Minus, sig)?])
}

fn combined_requirements(
    trees: &[SignedNode; 2],
    vars: &[String],
    eps: &[Tone],
) -> Result<BTreeSet<(usize, usize)>, String> {
    let mut need = requirements(&trees[0], vars, eps).map_err(|e| format!("+lhs: {e}"))?;
    need.extend(requirements(&trees[1], vars, eps).map_err(|e| format!("-rhs: {e}"))?);
    Ok(need)
}

/// Whether `s <= t` is analytic (Ω, ε)-inductive for the witness.
pub fn is_analytic_inductive(
    ineq: &(Formula, Formula),
    sig: &Signature,
    w: &InductiveWitness,
) -> Result<Analysis, ClassifyError> {
    let vars = variables(ineq);
    if vars != w.vars || w.epsilon.len() != vars.len() {
        return Err(ClassifyError::VariableMismatch { expected: vars, found: w.vars.clone() });
    }
    let trees = trees(ineq, sig)?;
    Ok(match combined_requirements(&trees, &vars, &w.epsilon) {
        Err(d) => Analysis { holds: false, diagnostic: Some(d) },
        Ok(need) => match need.iter().find(|p| !w.omega.contains(p)) {
            Some(&(k, i)) => {
                let cycle = if has_cycle(&need, vars.len()) { "; the required dependencies are cyclic" } else { "" };
                Analysis {
                    holds: false,
                    diagnostic: Some(format!("dependency {} < {} missing from omega{cycle}", vars[k], vars[i])),
                }
            }
            None => Analysis { holds: true, diagnostic: None },
        },
    })
}

/// Whether no strict order contains `pairs`.
fn has_cycle(pairs: &BTreeSet<(usize, usize)>, n: usize) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in pairs {
        reach[a][b] = true;
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                reach[a][b] |= reach[a][k] && reach[k][b];
            }
        }
    }
    (0..n).any(|a| reach[a][a])
}

fn bit(n: usize, a: usize, b: usize) -> u64 {
    1 << (a * n + b)
}

fn pairs_of(mask: u64, n: usize) -> Vec<(usize, usize)> {
    (0..n * n).filter(|&k| mask >> k & 1 == 1).map(|k| (k / n, k % n)).collect()
}

fn extend_posets(prev: &[u64], k: usize, n: usize) -> Vec<u64> {
    // New element k sits above the down-set D and below the up-set U; D < U must already hold.
    let mut out = Vec::new();
    for &m in prev {
        let lt = |a: usize, b: usize| m & bit(n, a, b) != 0;
        for d in 0u32..(1 << k) {
            let in_d = |a: usize| d >> a & 1 == 1;
            if !(0..k).all(|a| !in_d(a) || (0..k).all(|b| !lt(b, a) || in_d(b))) {
                continue;
            }
            for u in 0u32..(1 << k) {
                if d & u != 0 {
                    continue;
                }
                let in_u = |a: usize| u >> a & 1 == 1;
                if !(0..k).all(|a| !in_u(a) || (0..k).all(|b| !lt(a, b) || in_u(b))) {
                    continue;
                }
                if !(0..k).all(|a| !in_d(a) || (0..k).all(|b| !in_u(b) || lt(a, b))) {
                    continue;
                }
                let mut nm = m;
                for a in 0..k {
                    if in_d(a) {
                        nm |= bit(n, a, k);
                    }
                    if in_u(a) {
                        nm |= bit(n, k, a);
                    }
                }
                out.push(nm);
            }
        }
    }
    out
}

/// All strict partial orders on `n` labelled elements, in search order,
/// as bitmasks with bit `a*n+b` meaning `a < b`.
pub fn strict_partial_orders(n: usize) -> &'static [u64] {
    static CACHE: [OnceLock<Vec<u64>>; MAX_VARS + 1] = [const { OnceLock::new() }; MAX_VARS + 1];
    assert!(n <= MAX_VARS, "at most {MAX_VARS} variables");
    CACHE[n].get_or_init(|| {
        let mut all = vec![0u64];
        for k in 0..n {
            all = extend_posets(&all, k, n);
        }
        all.sort_by_cached_key(|&m| (m.count_ones(), pairs_of(m, n)));
        all
    })
}

/// First witness in search order, or `None` after exhausting all of them.
pub fn find_witness(ineq: &(Formula, Formula), sig: &Signature) -> Result<Option<InductiveWitness>, ClassifyError> {
    let vars = variables(ineq);
    let n = vars.len();
    if n > MAX_VARS {
        return Err(ClassifyError::TooManyVariables(n, MAX_VARS));
    }
    let trees = trees(ineq, sig)?;
    let posets = strict_partial_orders(n);
    let masks: Vec<u32> = (0..1u32 << n).collect();
    Ok(exec::par_find_first(&masks, |&m| {
        let eps: Vec<Tone> = (0..n).map(|i| if m >> i & 1 == 1 { Tone::Dual } else { Tone::One }).collect();
        let need = combined_requirements(&trees, &vars, &eps).ok()?;
        let want = need.iter().fold(0u64, |acc, &(k, i)| acc | bit(n, k, i));
        let omega = posets.iter().find(|&&p| p & want == want)?;
        Some(InductiveWitness { vars: vars.clone(), epsilon: eps, omega: pairs_of(*omega, n).into_iter().collect() })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{Connective, Tone::*};
    use crate::syntax::parse_inequality;

    fn modal() -> Signature {
        Signature::new([Connective::new("dia", Sort::F, vec![One]), Connective::new("box", Sort::G, vec![One])])
            .unwrap()
    }

    fn fl() -> Signature {
        Signature::new([
            Connective::new("circ", Sort::F, vec![One, One]),
            Connective::new("bslash", Sort::G, vec![Dual, One]),
            Connective::new("slash", Sort::G, vec![One, Dual]),
        ])
        .unwrap()
    }

    #[test]
    fn box_dia_classes() {
        let sig = modal();
        let t = signed_tree(&crate::syntax::parse_formula("box(dia(p))", &sig).unwrap(), Sign::Plus, &sig).unwrap();
        assert_eq!(t.class, NodeClass::Sra);
        assert_eq!(t.children[0].class, NodeClass::Slr);
        assert_eq!(t.children[0].children[0].sign, Sign::Plus);
    }

    #[test]
    fn negative_product_is_srr() {
        let sig = fl();
        let t = signed_tree(&crate::syntax::parse_formula("circ(p, q)", &sig).unwrap(), Sign::Minus, &sig).unwrap();
        assert_eq!(t.class, NodeClass::Srr);
    }

    #[test]
    fn poset_counts() {
        let counts: Vec<usize> = (0..=5).map(|n| strict_partial_orders(n).len()).collect();
        assert_eq!(counts, [1, 1, 3, 19, 219, 4231]);
    }

    #[test]
    fn identity_has_trivial_witness() {
        let sig = modal();
        let w = find_witness(&parse_inequality("p <= p", &sig).unwrap(), &sig).unwrap().unwrap();
        assert_eq!(w.epsilon, [One]);
        assert!(w.omega.is_empty());
    }

    #[test]
    fn commutativity_with_empty_omega() {
        let sig = fl();
        let ineq = parse_inequality("circ(p, q) <= circ(q, p)", &sig).unwrap();
        let w =
            InductiveWitness { vars: vec!["p".into(), "q".into()], epsilon: vec![One, One], omega: BTreeSet::new() };
        assert!(is_analytic_inductive(&ineq, &sig, &w).unwrap().holds);
    }

    #[test]
    fn box_dia_has_no_witness() {
        let sig = modal();
        let ineq = parse_inequality("box(dia(p)) <= dia(box(p))", &sig).unwrap();
        assert_eq!(find_witness(&ineq, &sig).unwrap(), None);
        let w = InductiveWitness { vars: vec!["p".into()], epsilon: vec![Dual], omega: BTreeSet::new() };
        let a = is_analytic_inductive(&ineq, &sig, &w).unwrap();
        assert!(a.diagnostic.unwrap().contains("not good"));
    }

    #[test]
    fn dependency_cycles() {
        let two: BTreeSet<_> = [(0, 1), (1, 0)].into();
        assert!(has_cycle(&two, 2));
        let three: BTreeSet<_> = [(0, 1), (1, 2), (2, 0)].into();
        assert!(has_cycle(&three, 3));
        let chain: BTreeSet<_> = [(0, 1), (1, 2)].into();
        assert!(!has_cycle(&chain, 3));
    }

    #[test]
    fn missing_dependency_is_named() {
        let sig = fl();
        let ineq = parse_inequality("T <= circ(p, q)", &sig).unwrap();
        let w =
            InductiveWitness { vars: vec!["p".into(), "q".into()], epsilon: vec![Dual, One], omega: BTreeSet::new() };
        let a = is_analytic_inductive(&ineq, &sig, &w).unwrap();
        assert!(!a.holds);
        assert_eq!(a.diagnostic.unwrap(), "dependency q < p missing from omega");
    }
}
