//! Finite polarities, relational sections, LE-frames and their complex
//! algebras, sequent evaluation, and the finite countermodel built from a
//! saturated backward closure.

use std::collections::{BTreeMap, HashMap};

use fixedbitset::FixedBitSet;
use indexmap::{IndexMap, IndexSet};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{Meta, RuleClass, RuleSchema, SeqPat};
use crate::exec;
use crate::search::{Calculus, Saturation};
use crate::signature::{Connective, Origin, Signature, Sort, Tone};
use crate::syntax::{parse_sequent, Formula, Sequent, Structure};

/// A subset of a finite carrier.
pub type Set = FixedBitSet;

/// Default bound on the number of stable sets enumerated.
pub const LATTICE_BOUND: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("stable-set lattice exceeds the bound of {0} elements")]
    TooLarge(usize),
    #[error("atom `{0}` has no value")]
    MissingAtom(String),
    #[error("unknown connective `{0}`")]
    UnknownConnective(String),
    #[error("countermodel does not refute {0}")]
    NotRefuted(String),
    #[error("relation `{name}`: expected {expected} coordinates, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("frame file: {0}")]
    Format(String),
}

pub fn full(n: usize) -> Set {
    let mut s = Set::with_capacity(n);
    s.insert_range(..);
    s
}

pub fn singleton(n: usize, i: usize) -> Set {
    let mut s = Set::with_capacity(n);
    s.insert(i);
    s
}

fn subset(a: &Set, b: &Set) -> bool {
    a.is_subset(b)
}

/// Calls `f` on every tuple of the cartesian product (once for zero sets).
pub fn for_each_tuple(sets: &[&Set], mut f: impl FnMut(&[usize])) {
    let lists: Vec<Vec<usize>> = sets.iter().map(|s| s.ones().collect()).collect();
    if lists.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0; lists.len()];
    let mut cur: Vec<usize> = lists.iter().map(|l| l[0]).collect();
    loop {
        f(&cur);
        let mut k = lists.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                cur[k] = lists[k][idx[k]];
                break;
            }
            idx[k] = 0;
            cur[k] = lists[k][0];
        }
    }
}

// ---------------------------------------------------------------- polarity

/// A polarity `(W, U, N)` with `N` stored by rows and by columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polarity {
    rows: Vec<Set>,
    cols: Vec<Set>,
}

impl Polarity {
    pub fn new(w: usize, u: usize) -> Self {
        Polarity { rows: vec![Set::with_capacity(u); w], cols: vec![Set::with_capacity(w); u] }
    }

    pub fn from_pairs(w: usize, u: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut p = Polarity::new(w, u);
        for (a, b) in pairs {
            p.relate(a, b);
        }
        p
    }

    pub fn random(w: usize, u: usize, density: f64, rng: &mut impl Rng) -> Self {
        let mut p = Polarity::new(w, u);
        for a in 0..w {
            for b in 0..u {
                if rng.gen_bool(density) {
                    p.relate(a, b);
                }
            }
        }
        p
    }

    pub fn w_len(&self) -> usize {
        self.rows.len()
    }

    pub fn u_len(&self) -> usize {
        self.cols.len()
    }

    pub fn relate(&mut self, w: usize, u: usize) {
        self.rows[w].insert(u);
        self.cols[u].insert(w);
    }

    pub fn related(&self, w: usize, u: usize) -> bool {
        self.rows[w].contains(u)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.w_len()).flat_map(|w| self.rows[w].ones().map(move |u| (w, u))).collect()
    }

    /// `X↑ = {u | ∀w ∈ X. w N u}`.
    pub fn up(&self, x: &Set) -> Set {
        let mut out = full(self.u_len());
        for w in x.ones() {
            out.intersect_with(&self.rows[w]);
        }
        out
    }

    /// `Y↓ = {w | ∀u ∈ Y. w N u}`.
    pub fn down(&self, y: &Set) -> Set {
        let mut out = full(self.w_len());
        for u in y.ones() {
            out.intersect_with(&self.cols[u]);
        }
        out
    }

    /// `γ_N(X) = X↑↓`.
    pub fn closure(&self, x: &Set) -> Set {
        self.down(&self.up(x))
    }

    /// `Y↓↑`.
    pub fn closure_u(&self, y: &Set) -> Set {
        self.up(&self.down(y))
    }

    pub fn column(&self, u: usize) -> Set {
        self.cols[u].clone()
    }

    pub fn is_stable(&self, x: &Set) -> bool {
        self.closure(x) == *x
    }

    fn close_side(&self, side: Sort, s: &Set) -> Set {
        match side {
            Sort::F => self.closure(s),
            Sort::G => self.closure_u(s),
        }
    }

    fn side_len(&self, side: Sort) -> usize {
        match side {
            Sort::F => self.w_len(),
            Sort::G => self.u_len(),
        }
    }

    pub fn top(&self) -> Set {
        full(self.w_len())
    }

    pub fn bottom(&self) -> Set {
        self.down(&full(self.u_len()))
    }

    pub fn join(&self, a: &Set, b: &Set) -> Set {
        let mut u = a.clone();
        u.union_with(b);
        self.closure(&u)
    }

    /// All stable sets, as intersections of attribute extents, in discovery order.
    pub fn stable_sets(&self, bound: usize) -> Result<Vec<Set>, FrameError> {
        let mut out: IndexSet<Set> = IndexSet::new();
        out.insert(self.top());
        for u in 0..self.u_len() {
            let col = &self.cols[u];
            let existing: Vec<Set> = out.iter().cloned().collect();
            for s in existing {
                let mut t = s;
                t.intersect_with(col);
                out.insert(t);
                if out.len() > bound {
                    return Err(FrameError::TooLarge(bound));
                }
            }
        }
        Ok(out.into_iter().collect())
    }
}

// ---------------------------------------------------------------- relations

/// A relation `S ⊆ A × B_1 × … × B_n` on finite carriers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    dims: Vec<usize>,
    bits: Set,
}

impl Relation {
    pub fn new(dims: Vec<usize>) -> Self {
        let size = dims.iter().product();
        Relation { dims, bits: Set::with_capacity(size) }
    }

    pub fn random(dims: Vec<usize>, density: f64, rng: &mut impl Rng) -> Self {
        let mut r = Relation::new(dims);
        for i in 0..r.bits.len() {
            if rng.gen_bool(density) {
                r.bits.insert(i);
            }
        }
        r
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len() - 1
    }

    fn index(&self, t: &[usize]) -> usize {
        t.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }

    pub fn insert(&mut self, t: &[usize]) {
        let i = self.index(t);
        self.bits.insert(i);
    }

    pub fn contains(&self, t: &[usize]) -> bool {
        self.bits.contains(self.index(t))
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tuples(&self) -> Vec<Vec<usize>> {
        self.bits
            .ones()
            .map(|mut i| {
                let mut t = vec![0; self.dims.len()];
                for k in (0..self.dims.len()).rev() {
                    t[k] = i % self.dims[k];
                    i /= self.dims[k];
                }
                t
            })
            .collect()
    }

    /// `S^(0)[C̄] = {a | ∀c̄ ∈ ΠC̄. S(a, c̄)}`.
    pub fn section0(&self, args: &[Set]) -> Set {
        assert_eq!(args.len(), self.arity(), "section arity");
        let mut out = full(self.dims[0]);
        let refs: Vec<&Set> = args.iter().collect();
        let mut t = vec![0; self.dims.len()];
        for_each_tuple(&refs, |c| {
            t[1..].copy_from_slice(c);
            let hits: Vec<usize> = out.ones().collect();
            for a in hits {
                t[0] = a;
                if !self.contains(&t) {
                    out.set(a, false);
                }
            }
        });
        out
    }

    /// `S^(i)[A', C̄^i] = {b ∈ B_i | ∀a ∈ A' ∀c̄ ∈ ΠC̄^i. S(a, c̄[i := b])}`,
    /// with `i` 1-based; `args[i-1]` is ignored.
    pub fn section(&self, i: usize, a_prime: &Set, args: &[Set]) -> Set {
        assert!(i >= 1 && i <= self.arity(), "section coordinate");
        let mut out = full(self.dims[i]);
        let mut refs: Vec<&Set> = vec![a_prime];
        let dummy = singleton(self.dims[i], 0);
        for (k, s) in args.iter().enumerate() {
            refs.push(if k + 1 == i { &dummy } else { s });
        }
        let mut t = vec![0; self.dims.len()];
        for_each_tuple(&refs, |c| {
            t.copy_from_slice(c);
            let hits: Vec<usize> = out.ones().collect();
            for b in hits {
                t[i] = b;
                if !self.contains(&t) {
                    out.set(b, false);
                }
            }
        });
        out
    }
}

// ---------------------------------------------------------------- frames

/// The relation interpreting one connective.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameRel {
    /// Explicit tuples; coordinate 0 is the result side.
    Tuples(Relation),
    /// Functional relation given by a partial operation on carriers; missing
    /// entries map to an element related to everything.
    Function(HashMap<Vec<usize>, usize>),
}

/// An LE-frame: a polarity with one relation per base connective.
#[derive(Clone, Debug)]
pub struct LEFrame {
    pub sig: Signature,
    full: Signature,
    pub pol: Polarity,
    pub rels: IndexMap<String, FrameRel>,
    pub w_labels: Vec<String>,
    pub u_labels: Vec<String>,
}

fn side_of_result(c: &Connective) -> Sort {
    match c.family {
        Sort::F => Sort::G,
        Sort::G => Sort::F,
    }
}

impl LEFrame {
    pub fn new(sig: &Signature, pol: Polarity) -> Self {
        let sig: Signature = Signature::from_connectives(sig.base().cloned());
        let w_labels = (0..pol.w_len()).map(|i| format!("w{i}")).collect();
        let u_labels = (0..pol.u_len()).map(|i| format!("u{i}")).collect();
        let mut f = LEFrame { full: sig.expand(), sig, pol, rels: IndexMap::new(), w_labels, u_labels };
        let names: Vec<String> = f.sig.base().map(|c| c.name.clone()).collect();
        for n in names {
            let dims = f.rel_dims(&n);
            f.rels.insert(n, FrameRel::Tuples(Relation::new(dims)));
        }
        f
    }

    fn conn(&self, name: &str) -> Result<&Connective, FrameError> {
        self.full.get(name).ok_or_else(|| FrameError::UnknownConnective(name.into()))
    }

    /// Carrier sizes: the result side first, then one per argument.
    pub fn rel_dims(&self, name: &str) -> Vec<usize> {
        let c = self.sig.get(name).expect("base connective");
        let mut dims = vec![self.pol.side_len(side_of_result(c))];
        dims.extend((0..c.arity).map(|i| self.pol.side_len(c.arg_sort(i))));
        dims
    }

    /// Random tuples for every relation, then closed under the stability
    /// conditions.
    pub fn random_stabilized(sig: &Signature, w: usize, u: usize, rng: &mut impl Rng) -> Self {
        let pol = Polarity::random(w, u, rng.gen_range(0.2..0.7), rng);
        let mut f = LEFrame::new(sig, pol);
        let names: Vec<String> = f.rels.keys().cloned().collect();
        for n in names {
            let dims = f.rel_dims(&n);
            let d = rng.gen_range(0.1..0.6);
            f.rels.insert(n, FrameRel::Tuples(Relation::random(dims, d, rng)));
        }
        f.stabilize();
        f
    }

    fn holds(&self, name: &str, c: &Connective, t: &[usize]) -> bool {
        match &self.rels[name] {
            FrameRel::Tuples(r) => r.contains(t),
            FrameRel::Function(tab) => match tab.get(&t[1..]) {
                None => true,
                Some(&v) => match c.family {
                    Sort::F => self.pol.related(v, t[0]),
                    Sort::G => self.pol.related(t[0], v),
                },
            },
        }
    }

    /// `R^(0)[C̄]` for the relation of a base connective.
    pub fn section0(&self, name: &str, args: &[Set]) -> Set {
        let c = self.sig.get(name).expect("base connective");
        match &self.rels[name] {
            FrameRel::Tuples(r) => r.section0(args),
            FrameRel::Function(tab) => {
                let (res_len, img_len) = match c.family {
                    Sort::F => (self.pol.u_len(), self.pol.w_len()),
                    Sort::G => (self.pol.w_len(), self.pol.u_len()),
                };
                if args.iter().any(|a| a.count_ones(..) == 0) {
                    return full(res_len);
                }
                let mut img = Set::with_capacity(img_len);
                for (t, &v) in tab {
                    if t.iter().zip(args).all(|(&x, s)| s.contains(x)) {
                        img.insert(v);
                    }
                }
                match c.family {
                    Sort::F => self.pol.up(&img),
                    Sort::G => self.pol.down(&img),
                }
            }
        }
    }

    /// `R^(i)[A', C̄^i]` (1-based `i`).
    pub fn section(&self, name: &str, i: usize, a_prime: &Set, args: &[Set]) -> Set {
        let c = self.sig.get(name).expect("base connective").clone();
        match &self.rels[name] {
            FrameRel::Tuples(r) => r.section(i, a_prime, args),
            FrameRel::Function(_) => {
                let dims = self.rel_dims(name);
                let mut out = full(dims[i]);
                for b in 0..dims[i] {
                    let mut refs: Vec<&Set> = vec![a_prime];
                    let pin = singleton(dims[i], b);
                    for (k, s) in args.iter().enumerate() {
                        refs.push(if k + 1 == i { &pin } else { s });
                    }
                    let mut ok = true;
                    for_each_tuple(&refs, |t| ok &= self.holds(name, &c, t));
                    if !ok {
                        out.set(b, false);
                    }
                }
                out
            }
        }
    }

    /// Adds tuples until every section at singleton arguments is stable.
    pub fn stabilize(&mut self) {
        let names: Vec<String> = self.rels.keys().cloned().collect();
        loop {
            let mut changed = false;
            for n in &names {
                let c = self.sig.get(n).expect("base").clone();
                let dims = self.rel_dims(n);
                let FrameRel::Tuples(mut r) = self.rels[n].clone() else { continue };
                let sides: Vec<Sort> =
                    std::iter::once(side_of_result(&c)).chain((0..c.arity).map(|i| c.arg_sort(i))).collect();
                for coord in 0..dims.len() {
                    let others: Vec<usize> = (0..dims.len()).filter(|&k| k != coord).collect();
                    let fulls: Vec<Set> = others.iter().map(|&k| full(dims[k])).collect();
                    let refs: Vec<&Set> = fulls.iter().collect();
                    let mut adds = Vec::new();
                    for_each_tuple(&refs, |fixed| {
                        let mut t = vec![0; dims.len()];
                        for (j, &k) in others.iter().enumerate() {
                            t[k] = fixed[j];
                        }
                        let mut sec = Set::with_capacity(dims[coord]);
                        for x in 0..dims[coord] {
                            t[coord] = x;
                            if r.contains(&t) {
                                sec.insert(x);
                            }
                        }
                        let closed = self.pol.close_side(sides[coord], &sec);
                        for x in closed.difference(&sec) {
                            t[coord] = x;
                            adds.push(t.clone());
                        }
                    });
                    if !adds.is_empty() {
                        changed = true;
                        for t in adds {
                            r.insert(&t);
                        }
                    }
                }
                self.rels.insert(n.clone(), FrameRel::Tuples(r));
            }
            if !changed {
                break;
            }
        }
    }

    /// Checks the stability conditions at singleton arguments; returns the
    /// first violation.
    pub fn check_stability(&self) -> Result<(), String> {
        for (n, _) in &self.rels {
            let c = self.sig.get(n).expect("base").clone();
            let dims = self.rel_dims(n);
            let sides: Vec<Sort> =
                std::iter::once(side_of_result(&c)).chain((0..c.arity).map(|i| c.arg_sort(i))).collect();
            for (coord, &side) in sides.iter().enumerate() {
                let others: Vec<usize> = (0..dims.len()).filter(|&k| k != coord).collect();
                let fulls: Vec<Set> = others.iter().map(|&k| full(dims[k])).collect();
                let refs: Vec<&Set> = fulls.iter().collect();
                let mut bad = None;
                for_each_tuple(&refs, |fixed| {
                    if bad.is_some() {
                        return;
                    }
                    let mut singles = vec![Set::new(); dims.len()];
                    for (j, &k) in others.iter().enumerate() {
                        singles[k] = singleton(dims[k], fixed[j]);
                    }
                    let sec = if coord == 0 {
                        self.section0(n, &singles[1..])
                    } else {
                        self.section(n, coord, &singles[0], &singles[1..])
                    };
                    if self.pol.close_side(side, &sec) != sec {
                        bad = Some(format!("{n}: section {coord} at {fixed:?} is not stable"));
                    }
                });
                if let Some(b) = bad {
                    return Err(b);
                }
            }
        }
        Ok(())
    }

    fn arg_side(&self, c: &Connective, args: &[Set]) -> Vec<Set> {
        args.iter()
            .enumerate()
            .map(|(i, x)| match c.arg_sort(i) {
                Sort::F => x.clone(),
                Sort::G => self.pol.up(x),
            })
            .collect()
    }

    /// The complex-algebra operation of a base connective on stable sets.
    pub fn op(&self, name: &str, args: &[Set]) -> Result<Set, FrameError> {
        let c = self.conn(name)?.clone();
        if args.len() != c.arity {
            return Err(FrameError::Arity { name: name.into(), expected: c.arity, got: args.len() });
        }
        let sec = self.section0(name, &self.arg_side(&c, args));
        Ok(match c.family {
            Sort::F => self.pol.down(&sec),
            Sort::G => sec,
        })
    }

    /// Residual operations, computed from the parent operation without
    /// enumerating the lattice.
    pub fn residual_op(&self, name: &str, args: &[Set]) -> Result<Set, FrameError> {
        let c = self.conn(name)?.clone();
        let Origin::Residual { parent, coord } = &c.origin else {
            return self.op(name, args);
        };
        let p = self.conn(parent)?.clone();
        let i = coord - 1;
        let b = &args[i];
        let nw = self.pol.w_len();
        let with = |x: Set| -> Result<Set, FrameError> {
            let mut a = args.to_vec();
            a[i] = x;
            self.op(parent, &a)
        };
        let principal: Vec<Set> = (0..self.pol.u_len()).map(|u| self.pol.column(u)).collect();
        Ok(match (p.family, p.order_type.get(i)) {
            (Sort::F, Tone::One) => {
                let mut out = Set::with_capacity(nw);
                for w in 0..nw {
                    if subset(&with(self.pol.closure(&singleton(nw, w)))?, b) {
                        out.insert(w);
                    }
                }
                out
            }
            (Sort::G, Tone::Dual) => {
                let mut out = Set::with_capacity(nw);
                for w in 0..nw {
                    if subset(b, &with(self.pol.closure(&singleton(nw, w)))?) {
                        out.insert(w);
                    }
                }
                out
            }
            (fam, _) => {
                let mut out = full(nw);
                for col in principal {
                    let v = with(col.clone())?;
                    let ok = match fam {
                        Sort::F => subset(&v, b),
                        Sort::G => subset(b, &v),
                    };
                    if ok {
                        out.intersect_with(&col);
                    }
                }
                out
            }
        })
    }

    pub fn eval_formula(&self, f: &Formula, h0: &BTreeMap<String, Set>) -> Result<Set, FrameError> {
        Ok(match f {
            Formula::Atom(p) => h0.get(p).cloned().ok_or_else(|| FrameError::MissingAtom(p.clone()))?,
            Formula::Top => self.pol.top(),
            Formula::Bot => self.pol.bottom(),
            Formula::Meet(a, b) => {
                let mut x = self.eval_formula(a, h0)?;
                x.intersect_with(&self.eval_formula(b, h0)?);
                x
            }
            Formula::Join(a, b) => self.pol.join(&self.eval_formula(a, h0)?, &self.eval_formula(b, h0)?),
            Formula::App(n, args) => {
                let vals = args.iter().map(|a| self.eval_formula(a, h0)).collect::<Result<Vec<_>, _>>()?;
                self.op(n, &vals)?
            }
        })
    }

    pub fn eval_structure(&self, s: &Structure, h0: &BTreeMap<String, Set>) -> Result<Set, FrameError> {
        match s {
            Structure::Fml(f) => self.eval_formula(f, h0),
            Structure::SApp { name, args, .. } => {
                let vals = args.iter().map(|a| self.eval_structure(a, h0)).collect::<Result<Vec<_>, _>>()?;
                self.residual_op(name, &vals)
            }
        }
    }

    /// `h(x) ⊆ h(y)`.
    pub fn eval_sequent(&self, h0: &BTreeMap<String, Set>, s: &Sequent) -> Result<bool, FrameError> {
        Ok(subset(&self.eval_structure(&s.ant, h0)?, &self.eval_structure(&s.suc, h0)?))
    }

    fn to_file(&self) -> FrameFile {
        let relations = self
            .rels
            .iter()
            .map(|(n, r)| {
                let rf = match r {
                    FrameRel::Tuples(r) => RelFile::Tuples { tuples: r.tuples() },
                    FrameRel::Function(tab) => {
                        let mut entries: Vec<(Vec<usize>, usize)> = tab.iter().map(|(k, v)| (k.clone(), *v)).collect();
                        entries.sort();
                        RelFile::Function { entries }
                    }
                };
                (n.clone(), rf)
            })
            .collect();
        FrameFile {
            w: self.w_labels.clone(),
            u: self.u_labels.clone(),
            n: self.pol.pairs(),
            signature: Some(serde_json::from_str(&self.sig.to_json()).expect("signature json")),
            relations,
            valuation: None,
            goal: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("frame serializes")
    }

    fn from_file(file: &FrameFile) -> Result<Self, FrameError> {
        let (nw, nu) = (file.w.len(), file.u.len());
        if let Some(&(w, u)) = file.n.iter().find(|(w, u)| *w >= nw || *u >= nu) {
            return Err(FrameError::Format(format!("pair ({w}, {u}) out of range")));
        }
        let sig = match &file.signature {
            Some(v) => {
                Signature::from_json(&v.to_string()).map_err(|e| FrameError::Format(format!("signature: {}", e[0])))?
            }
            None => Signature::empty(),
        };
        let mut f = LEFrame::new(&sig, Polarity::from_pairs(nw, nu, file.n.iter().copied()));
        f.w_labels = file.w.clone();
        f.u_labels = file.u.clone();
        for (n, r) in &file.relations {
            if f.sig.get(n).is_none() {
                return Err(FrameError::UnknownConnective(n.clone()));
            }
            let dims = f.rel_dims(n);
            let in_range = |t: &[usize], off: usize| t.iter().enumerate().all(|(k, &x)| x < dims[k + off]);
            let rel = match r {
                RelFile::Tuples { tuples } => {
                    let mut rel = Relation::new(dims.clone());
                    for t in tuples {
                        if t.len() != dims.len() || !in_range(t, 0) {
                            return Err(FrameError::Format(format!("{n}: bad tuple {t:?}")));
                        }
                        rel.insert(t);
                    }
                    FrameRel::Tuples(rel)
                }
                RelFile::Function { entries } => {
                    let mut tab = HashMap::new();
                    let img = match f.sig.get(n).expect("checked").family {
                        Sort::F => nw,
                        Sort::G => nu,
                    };
                    for (k, v) in entries {
                        if k.len() + 1 != dims.len() || !in_range(k, 1) || *v >= img {
                            return Err(FrameError::Format(format!("{n}: bad entry {k:?}")));
                        }
                        tab.insert(k.clone(), *v);
                    }
                    FrameRel::Function(tab)
                }
            };
            f.rels.insert(n.clone(), rel);
        }
        Ok(f)
    }

    pub fn from_json(text: &str) -> Result<Self, FrameError> {
        let file: FrameFile = serde_json::from_str(text).map_err(|e| FrameError::Format(e.to_string()))?;
        LEFrame::from_file(&file)
    }
}

#[derive(Serialize, Deserialize)]
struct FrameFile {
    #[serde(rename = "W")]
    w: Vec<String>,
    #[serde(rename = "U")]
    u: Vec<String>,
    #[serde(rename = "N")]
    n: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signature: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    relations: BTreeMap<String, RelFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valuation: Option<BTreeMap<String, Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RelFile {
    Tuples { tuples: Vec<Vec<usize>> },
    Function { entries: Vec<(Vec<usize>, usize)> },
}

// ---------------------------------------------------------------- complex algebra

type BinOp = fn(&ComplexAlgebra, usize, usize) -> usize;

/// The finite lattice of stable sets with every operation tabled.
pub struct ComplexAlgebra {
    pub elems: Vec<Set>,
    index: HashMap<Set, usize>,
    tables: HashMap<String, Vec<usize>>,
    arities: HashMap<String, usize>,
    leq: Vec<Set>,
    pub bottom: usize,
    pub top: usize,
    join: Vec<usize>,
    meet: Vec<usize>,
}

/// Outcome of checking one rule in an algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleCheck {
    pub rule: String,
    pub assignments: u64,
    pub violation: Option<String>,
}

impl ComplexAlgebra {
    pub fn new(frame: &LEFrame, bound: usize) -> Result<Self, FrameError> {
        let elems = frame.pol.stable_sets(bound)?;
        let m = elems.len();
        let index: HashMap<Set, usize> = elems.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let leq: Vec<Set> = exec::par_range(m, |a| {
            let mut row = Set::with_capacity(m);
            for b in 0..m {
                if subset(&elems[a], &elems[b]) {
                    row.insert(b);
                }
            }
            row
        });
        let look = |s: &Set| *index.get(s).expect("operation result is stable");
        let bottom = look(&frame.pol.bottom());
        let top = look(&frame.pol.top());
        let mut join = vec![0; m * m];
        let mut meet = vec![0; m * m];
        for a in 0..m {
            for b in 0..m {
                join[a * m + b] = look(&frame.pol.join(&elems[a], &elems[b]));
                let mut x = elems[a].clone();
                x.intersect_with(&elems[b]);
                meet[a * m + b] = look(&x);
            }
        }
        let mut alg = ComplexAlgebra {
            elems,
            index,
            tables: HashMap::new(),
            arities: HashMap::new(),
            leq,
            bottom,
            top,
            join,
            meet,
        };
        for c in frame.sig.base() {
            let table = exec::par_range(m.pow(c.arity as u32), |k| {
                let args: Vec<Set> = alg.decode(k, c.arity).iter().map(|&i| alg.elems[i].clone()).collect();
                let v = frame.op(&c.name, &args).expect("base op");
                *alg.index.get(&v).expect("operation result is stable")
            });
            alg.tables.insert(c.name.clone(), table);
            alg.arities.insert(c.name.clone(), c.arity);
        }
        for c in frame.full.iter().filter(|c| !c.is_base()) {
            let table = alg.brute_residual(frame, c);
            alg.tables.insert(c.name.clone(), table);
            alg.arities.insert(c.name.clone(), c.arity);
        }
        Ok(alg)
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, s: &Set) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn decode(&self, mut k: usize, n: usize) -> Vec<usize> {
        let m = self.len();
        let mut out = vec![0; n];
        for j in (0..n).rev() {
            out[j] = k % m;
            k /= m;
        }
        out
    }

    fn encode(&self, args: &[usize]) -> usize {
        args.iter().fold(0, |acc, &a| acc * self.len() + a)
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a].contains(b)
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a * self.len() + b]
    }

    pub fn meet(&self, a: usize, b: usize) -> usize {
        self.meet[a * self.len() + b]
    }

    pub fn op(&self, name: &str, args: &[usize]) -> Option<usize> {
        let t = self.tables.get(name)?;
        (args.len() == self.arities[name]).then(|| t[self.encode(args)])
    }

    /// Residuals by exhaustive search over the lattice.
    fn brute_residual(&self, frame: &LEFrame, c: &Connective) -> Vec<usize> {
        let Origin::Residual { parent, coord } = &c.origin else { unreachable!() };
        let p = frame.full.get(parent).expect("parent").clone();
        let i = coord - 1;
        let m = self.len();
        exec::par_range(m.pow(c.arity as u32), |k| {
            let args = self.decode(k, c.arity);
            let b = args[i];
            let mut acc: Option<usize> = None;
            let greatest = matches!((p.family, p.order_type.get(i)), (Sort::F, Tone::One) | (Sort::G, Tone::Dual));
            for a in 0..m {
                let mut pa = args.clone();
                pa[i] = a;
                let v = self.tables[parent][self.encode(&pa)];
                let ok = match p.family {
                    Sort::F => self.leq(v, b),
                    Sort::G => self.leq(b, v),
                };
                if ok {
                    acc = Some(match (acc, greatest) {
                        (None, _) => a,
                        (Some(x), true) => self.join(x, a),
                        (Some(x), false) => self.meet(x, a),
                    });
                }
            }
            acc.unwrap_or(if greatest { self.bottom } else { self.top })
        })
    }

    /// Coordinatewise operator laws of every base operation, including the
    /// empty join/meet cases. Returns the violations found.
    pub fn operator_law_violations(&self, sig: &Signature) -> Vec<String> {
        let m = self.len();
        let mut out = Vec::new();
        for c in sig.base() {
            for i in 0..c.arity {
                let others = m.pow(c.arity as u32 - 1);
                let found: Vec<String> = exec::par_range(others, |k| {
                    let rest = self.decode(k, c.arity - 1);
                    let at = |x: usize| {
                        let mut a = rest.clone();
                        a.insert(i, x);
                        self.op(&c.name, &a).expect("op")
                    };
                    let mut bad = Vec::new();
                    let (unit, combine_arg, combine_val, val_unit): (usize, BinOp, BinOp, usize) =
                        match (c.family, c.order_type.get(i)) {
                            (Sort::F, Tone::One) => (self.bottom, Self::join, Self::join, self.bottom),
                            (Sort::F, Tone::Dual) => (self.top, Self::meet, Self::join, self.bottom),
                            (Sort::G, Tone::One) => (self.top, Self::meet, Self::meet, self.top),
                            (Sort::G, Tone::Dual) => (self.bottom, Self::join, Self::meet, self.top),
                        };
                    if at(unit) != val_unit {
                        bad.push(format!("{}: coordinate {} fails the empty case at {:?}", c.name, i + 1, rest));
                    }
                    for x in 0..m {
                        for y in 0..m {
                            if at(combine_arg(self, x, y)) != combine_val(self, at(x), at(y)) {
                                bad.push(format!("{}: coordinate {} fails at {:?} with {x}, {y}", c.name, i + 1, rest));
                            }
                        }
                    }
                    bad
                })
                .into_iter()
                .flatten()
                .collect();
                out.extend(found);
            }
        }
        out
    }

    fn eval_meta(&self, m: &Meta, vars: &HashMap<&str, usize>, asg: &[usize]) -> Option<usize> {
        match m {
            Meta::Var(v) => Some(asg[vars[v.as_str()]]),
            Meta::SApp(_, n, xs) => {
                let a = xs.iter().map(|x| self.eval_meta(x, vars, asg)).collect::<Option<Vec<_>>>()?;
                self.op(n, &a)
            }
            _ => None,
        }
    }

    fn holds(&self, p: &SeqPat, vars: &HashMap<&str, usize>, asg: &[usize]) -> bool {
        let a = self.eval_meta(&p.ant, vars, asg).expect("structural pattern");
        let b = self.eval_meta(&p.suc, vars, asg).expect("structural pattern");
        self.leq(a, b)
    }

    /// Validity of a structure-only rule under every assignment of lattice
    /// elements to its metavariables; invertible rules are checked both ways.
    pub fn check_rule(&self, rule: &RuleSchema, limit: u64) -> Result<RuleCheck, FrameError> {
        let names: Vec<String> = rule.metavars().into_iter().map(|v| v.name).collect();
        let vars: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let m = self.len() as u64;
        let total = m.checked_pow(names.len() as u32).unwrap_or(u64::MAX);
        if total > limit {
            return Err(FrameError::TooLarge(limit as usize));
        }
        let k = names.len();
        let first = if k == 0 { 1 } else { self.len() };
        let rest = total / first as u64;
        let bad = exec::par_range(first, |a0| {
            let mut asg = vec![0usize; k];
            if k > 0 {
                asg[0] = a0;
            }
            for r in 0..rest {
                let mut x = r;
                for j in (1..k).rev() {
                    asg[j] = (x % m) as usize;
                    x /= m;
                }
                let prem = rule.premises.iter().all(|p| self.holds(p, &vars, &asg));
                let concl = self.holds(&rule.conclusion, &vars, &asg);
                let fail = (prem && !concl) || (rule.invertible && concl && !prem);
                if fail {
                    let shown: Vec<String> = names.iter().zip(&asg).map(|(n, v)| format!("{n}={v}")).collect();
                    return Some(shown.join(", "));
                }
            }
            None
        })
        .into_iter()
        .flatten()
        .next();
        Ok(RuleCheck { rule: rule.name.clone(), assignments: total, violation: bad })
    }
}

/// True when the rule mentions structures only (no formula patterns).
pub fn is_structure_only(rule: &RuleSchema) -> bool {
    fn pure(m: &Meta) -> bool {
        match m {
            Meta::Var(_) => true,
            Meta::SApp(_, _, xs) => xs.iter().all(pure),
            _ => false,
        }
    }
    rule.premises.iter().chain(std::iter::once(&rule.conclusion)).all(|p| pure(&p.ant) && pure(&p.suc))
}

// ---------------------------------------------------------------- countermodel

/// A finite frame built from a saturated closure, with the valuation and the
/// goal it refutes.
#[derive(Clone, Debug)]
pub struct Countermodel {
    pub frame: LEFrame,
    pub valuation: BTreeMap<String, Set>,
    pub goal: Sequent,
    /// Number of core elements on each side.
    pub core: (usize, usize),
}

const SINK: &str = "#sink";

pub fn build_countermodel(sat: &Saturation, calc: &Calculus) -> Result<Countermodel, FrameError> {
    let cl = &sat.closure;
    let q = &calc.quotient;
    let mut ws: IndexSet<Structure> = IndexSet::new();
    let mut us: IndexSet<Structure> = IndexSet::new();
    for m in &cl.members {
        ws.insert(m.ant.clone());
        us.insert(m.suc.clone());
    }
    let core = (ws.len(), us.len());
    if q.star.is_some() {
        let stars_u: Vec<Structure> = ws.iter().filter_map(|c| q.star_of(Sort::F, c)).collect();
        let stars_w: Vec<Structure> = us.iter().filter_map(|c| q.star_of(Sort::G, c)).collect();
        us.extend(stars_u);
        ws.extend(stars_w);
    }
    let (nw, nu) = (ws.len() + 1, us.len() + 1);
    let mut pol = Polarity::new(nw, nu);
    for w in 0..nw {
        for u in 0..nu {
            let n = if w < core.0 && u < core.1 {
                match cl.members.get_index_of(&Sequent::new(ws[w].clone(), us[u].clone())) {
                    Some(i) => sat.derivable(i),
                    None => true,
                }
            } else {
                true
            };
            if n {
                pol.relate(w, u);
            }
        }
    }
    let mut frame = LEFrame::new(&calc.sig, pol);
    frame.w_labels = ws.iter().map(|s| s.to_string()).chain([SINK.to_string()]).collect();
    frame.u_labels = us.iter().map(|s| s.to_string()).chain([SINK.to_string()]).collect();
    let carrier = |s: Sort| if s == Sort::F { &ws } else { &us };
    let base: Vec<Connective> = frame.sig.base().cloned().collect();
    for c in &base {
        let mut tab: HashMap<Vec<usize>, usize> = HashMap::new();
        for (idx, s) in carrier(c.family).iter().enumerate() {
            if let Structure::SApp { name, args, .. } = s {
                if *name == c.name {
                    let ids: Option<Vec<usize>> =
                        args.iter().enumerate().map(|(i, a)| carrier(c.arg_sort(i)).get_index_of(a)).collect();
                    if let Some(ids) = ids {
                        tab.insert(ids, idx);
                    }
                }
            }
        }
        if let Some(star) = &q.star {
            // F.f(G.g(x)) and G.g(F.f(x)) cancel
            let (inner, outer_side) = if c.name == star.f {
                (&star.g, Sort::G)
            } else if c.name == star.g {
                (&star.f, Sort::F)
            } else {
                (&c.name, c.family)
            };
            if inner != &c.name {
                for (idx, s) in carrier(outer_side).iter().enumerate() {
                    if let Structure::SApp { name, args, .. } = s {
                        if name == inner {
                            if let Some(x) = carrier(c.family).get_index_of(&args[0]) {
                                tab.insert(vec![idx], x);
                            }
                        }
                    }
                }
            }
        }
        frame.rels.insert(c.name.clone(), FrameRel::Function(tab));
    }
    let mut valuation = BTreeMap::new();
    for p in cl.root().atoms() {
        let v = match us.get_index_of(&Structure::atom(&p)) {
            Some(u) => frame.pol.column(u),
            None => frame.pol.top(),
        };
        valuation.insert(p, v);
    }
    let cm = Countermodel { frame, valuation, goal: cl.root().clone(), core };
    if cm.refutes()? {
        Ok(cm)
    } else {
        Err(FrameError::NotRefuted(cm.goal.to_string()))
    }
}

impl Countermodel {
    /// True when the goal evaluates to false.
    pub fn refutes(&self) -> Result<bool, FrameError> {
        Ok(!self.frame.eval_sequent(&self.valuation, &self.goal)?)
    }

    pub fn to_json(&self) -> String {
        let mut file = self.frame.to_file();
        file.valuation = Some(self.valuation.iter().map(|(k, v)| (k.clone(), v.ones().collect())).collect());
        file.goal = Some(self.goal.to_string());
        serde_json::to_string_pretty(&file).expect("countermodel serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FrameError> {
        let file: FrameFile = serde_json::from_str(text).map_err(|e| FrameError::Format(e.to_string()))?;
        let frame = LEFrame::from_file(&file)?;
        let nw = frame.pol.w_len();
        let mut valuation = BTreeMap::new();
        for (k, v) in file.valuation.as_ref().ok_or_else(|| FrameError::Format("missing valuation".into()))? {
            let mut s = Set::with_capacity(nw);
            for &w in v {
                if w >= nw {
                    return Err(FrameError::Format(format!("valuation of {k}: {w} out of range")));
                }
                s.insert(w);
            }
            valuation.insert(k.clone(), s);
        }
        let goal_text = file.goal.as_ref().ok_or_else(|| FrameError::Format("missing goal".into()))?;
        let goal = parse_sequent(goal_text, &frame.sig).map_err(|e| FrameError::Format(e.to_string()))?;
        let core = (nw - 1, frame.pol.u_len() - 1);
        Ok(Countermodel { frame, valuation, goal, core })
    }

    /// Number of stable sets, if at most `bound`.
    pub fn algebra(&self, bound: usize) -> Result<ComplexAlgebra, FrameError> {
        ComplexAlgebra::new(&self.frame, bound)
    }
}

/// Structural rules of a calculus that are checked for validity in algebras.
pub fn checkable_rules(calc: &Calculus) -> Vec<&RuleSchema> {
    calc.rules
        .iter()
        .filter(|r| matches!(r.class, RuleClass::Structural | RuleClass::Display) && is_structure_only(r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::Tone::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(n: usize, xs: &[usize]) -> Set {
        let mut s = Set::with_capacity(n);
        xs.iter().for_each(|&x| s.insert(x));
        s
    }

    #[test]
    fn two_by_two_diagonal() {
        let p = Polarity::from_pairs(2, 2, [(0, 0), (1, 1)]);
        assert_eq!(p.up(&set(2, &[0])), set(2, &[0]));
        assert_eq!(p.down(&set(2, &[0])), set(2, &[0]));
        assert_eq!(p.up(&Set::with_capacity(2)), full(2));
        assert_eq!(p.down(&Set::with_capacity(2)), full(2));
        let mut st = p.stable_sets(100).unwrap();
        st.sort_by_key(|s| s.ones().collect::<Vec<_>>());
        let got: Vec<Vec<usize>> = st.iter().map(|s| s.ones().collect()).collect();
        assert_eq!(got, vec![vec![], vec![0], vec![0, 1], vec![1]]);
    }

    #[test]
    fn sections_of_a_single_pair() {
        let mut r = Relation::new(vec![1, 2]);
        r.insert(&[0, 0]);
        assert_eq!(r.section0(&[set(2, &[0])]), set(1, &[0]));
        assert_eq!(r.section0(&[set(2, &[0, 1])]), set(1, &[]));
        assert_eq!(r.section0(&[set(2, &[])]), full(1));
        assert_eq!(r.section(1, &set(1, &[0]), &[Set::new()]), set(2, &[0]));
    }

    #[test]
    fn total_diamond_relation() {
        let sig = Signature::new([Connective::new("dia", Sort::F, vec![One])]).unwrap();
        let pol = Polarity::from_pairs(2, 2, [(0, 0), (1, 1)]);
        let mut f = LEFrame::new(&sig, pol);
        let mut r = Relation::new(vec![2, 2]);
        for u in 0..2 {
            for w in 0..2 {
                r.insert(&[u, w]);
            }
        }
        f.rels.insert("dia".into(), FrameRel::Tuples(r));
        f.check_stability().unwrap();
        // the total relation sends every argument to the bottom U↓
        for x in [set(2, &[]), set(2, &[0]), full(2)] {
            assert_eq!(f.op("dia", &[x]).unwrap(), f.pol.bottom());
        }
        // the empty relation sends every nonempty argument to W
        f.rels.insert("dia".into(), FrameRel::Tuples(Relation::new(vec![2, 2])));
        assert_eq!(f.op("dia", &[set(2, &[0])]).unwrap(), full(2));
        assert_eq!(f.op("dia", &[set(2, &[])]).unwrap(), f.pol.bottom());
    }

    #[test]
    fn random_frames_satisfy_laws_and_residuals_agree() {
        let sig =
            Signature::new([Connective::new("f", Sort::F, vec![One, Dual]), Connective::new("g", Sort::G, vec![Dual])])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f = LEFrame::random_stabilized(&sig, 3, 3, &mut rng);
            f.check_stability().unwrap();
            let alg = ComplexAlgebra::new(&f, 1 << 10).unwrap();
            assert!(alg.operator_law_violations(&sig).is_empty());
            for c in f.full.iter().filter(|c| !c.is_base()) {
                for k in 0..alg.len().pow(c.arity as u32) {
                    let args = alg.decode(k, c.arity);
                    let sets: Vec<Set> = args.iter().map(|&a| alg.elems[a].clone()).collect();
                    let v = f.residual_op(&c.name, &sets).unwrap();
                    assert_eq!(alg.index_of(&v), alg.op(&c.name, &args), "{}", c.name);
                }
            }
        }
    }

    #[test]
    fn frame_json_round_trip() {
        let sig = Signature::new([Connective::new("box", Sort::G, vec![One])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = LEFrame::random_stabilized(&sig, 3, 2, &mut rng);
        let g = LEFrame::from_json(&f.to_json()).unwrap();
        assert_eq!(f.pol, g.pol);
        assert_eq!(f.rels, g.rels);
    }
}
