//! Two-sorted term language: formulas, F-/G-structures and sequents.
//!
//! Surface grammar (whitespace insignificant):
//!
//! ```text
//! sequent   ::= structure "=>" structure
//! structure ::= ("F." | "G.") name "(" [structure ("," structure)*] ")" | formula
//! formula   ::= meet ("|" meet)*
//! meet      ::= unit ("&" unit)*
//! unit      ::= atom | "T" | "B" | name "(" [formula ("," formula)*] ")" | "(" formula ")"
//! ```
//!
//! A bare name that denotes a nullary connective is read as that constant.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::signature::{Connective, Signature, Sort};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    Top,
    Bot,
    Meet(Box<Formula>, Box<Formula>),
    Join(Box<Formula>, Box<Formula>),
    App(String, Vec<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    pub fn meet(a: Formula, b: Formula) -> Formula {
        Formula::Meet(Box::new(a), Box::new(b))
    }

    pub fn join(a: Formula, b: Formula) -> Formula {
        Formula::Join(Box::new(a), Box::new(b))
    }

    pub fn app(name: &str, args: Vec<Formula>) -> Formula {
        Formula::App(name.to_string(), args)
    }

    pub fn complexity(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Top | Formula::Bot => 1,
            Formula::Meet(a, b) | Formula::Join(a, b) => 1 + a.complexity() + b.complexity(),
            Formula::App(_, args) => 1 + args.iter().map(Formula::complexity).sum::<usize>(),
        }
    }

    pub fn subformulas(&self, out: &mut BTreeSet<Formula>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Formula::Meet(a, b) | Formula::Join(a, b) => {
                a.subformulas(out);
                b.subformulas(out);
            }
            Formula::App(_, args) => args.iter().for_each(|a| a.subformulas(out)),
            _ => {}
        }
    }

    pub fn atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(p) => {
                out.insert(p.clone());
            }
            Formula::Meet(a, b) | Formula::Join(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
            Formula::App(_, args) => args.iter().for_each(|a| a.atoms(out)),
            _ => {}
        }
    }

    /// Atoms in order of first occurrence, left to right.
    pub fn atoms_in_order(&self, out: &mut Vec<String>) {
        match self {
            Formula::Atom(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Formula::Meet(a, b) | Formula::Join(a, b) => {
                a.atoms_in_order(out);
                b.atoms_in_order(out);
            }
            Formula::App(_, args) => args.iter().for_each(|a| a.atoms_in_order(out)),
            _ => {}
        }
    }
}

/// A structure. `SApp` carries the sort of the structural connective's family;
/// a bare formula is well-sorted at either sort.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    Fml(Formula),
    SApp { sort: Sort, name: String, args: Vec<Structure> },
}

impl Structure {
    pub fn sapp(sort: Sort, name: &str, args: Vec<Structure>) -> Structure {
        Structure::SApp { sort, name: name.to_string(), args }
    }

    pub fn atom(name: &str) -> Structure {
        Structure::Fml(Formula::atom(name))
    }

    pub fn complexity(&self) -> usize {
        match self {
            Structure::Fml(f) => f.complexity(),
            Structure::SApp { args, .. } => 1 + args.iter().map(Structure::complexity).sum::<usize>(),
        }
    }

    pub fn as_formula(&self) -> Option<&Formula> {
        match self {
            Structure::Fml(f) => Some(f),
            _ => None,
        }
    }

    /// Substructures at `sort` (this structure's own sort), with their sorts.
    pub fn substructures(&self, sort: Sort, sig: &Signature, out: &mut BTreeSet<(Sort, Structure)>) {
        if !out.insert((sort, self.clone())) {
            return;
        }
        if let Structure::SApp { name, args, .. } = self {
            let c = sig.get(name);
            for (i, a) in args.iter().enumerate() {
                let s = c.map(|c| c.arg_sort(i)).unwrap_or(sort);
                a.substructures(s, sig, out);
            }
        }
    }

    fn collect_formulas(&self, out: &mut BTreeSet<Formula>) {
        match self {
            Structure::Fml(f) => f.subformulas(out),
            Structure::SApp { args, .. } => args.iter().for_each(|a| a.collect_formulas(out)),
        }
    }

    fn collect_structures(&self, out: &mut BTreeSet<Structure>) {
        if out.insert(self.clone()) {
            if let Structure::SApp { args, .. } = self {
                args.iter().for_each(|a| a.collect_structures(out));
            }
        }
    }

    pub fn atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Structure::Fml(f) => f.atoms(out),
            Structure::SApp { args, .. } => args.iter().for_each(|a| a.atoms(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequent {
    pub ant: Structure,
    pub suc: Structure,
}

impl Sequent {
    pub fn new(ant: Structure, suc: Structure) -> Sequent {
        Sequent { ant, suc }
    }

    pub fn formulas(a: Formula, b: Formula) -> Sequent {
        Sequent::new(Structure::Fml(a), Structure::Fml(b))
    }

    pub fn complexity(&self) -> usize {
        self.ant.complexity() + self.suc.complexity()
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.ant.atoms(&mut out);
        self.suc.atoms(&mut out);
        out
    }
}

/// Total count of lattice, operational and structural connective occurrences.
pub fn complexity(s: &Sequent) -> usize {
    s.complexity()
}

/// Substructures and subformulas of both sides.
pub fn subterms(s: &Sequent) -> (BTreeSet<Structure>, BTreeSet<Formula>) {
    let mut ss = BTreeSet::new();
    let mut fs = BTreeSet::new();
    for side in [&s.ant, &s.suc] {
        side.collect_structures(&mut ss);
        side.collect_formulas(&mut fs);
    }
    (ss, fs)
}

// ---------------------------------------------------------------- printing

fn write_formula(f: &mut fmt::Formatter<'_>, phi: &Formula) -> fmt::Result {
    match phi {
        Formula::Atom(p) => f.write_str(p),
        Formula::Top => f.write_str("T"),
        Formula::Bot => f.write_str("B"),
        Formula::Meet(a, b) => {
            write_child(f, a, matches!(**a, Formula::Join(..)))?;
            f.write_str(" & ")?;
            write_child(f, b, matches!(**b, Formula::Join(..) | Formula::Meet(..)))
        }
        Formula::Join(a, b) => {
            write_formula(f, a)?;
            f.write_str(" | ")?;
            write_child(f, b, matches!(**b, Formula::Join(..)))
        }
        Formula::App(name, args) => {
            write!(f, "{name}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_formula(f, a)?;
            }
            f.write_str(")")
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, phi: &Formula, paren: bool) -> fmt::Result {
    if paren {
        f.write_str("(")?;
        write_formula(f, phi)?;
        f.write_str(")")
    } else {
        write_formula(f, phi)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self)
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Fml(phi) => write_formula(f, phi),
            Structure::SApp { sort, name, args } => {
                write!(f, "{sort}.{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.ant, self.suc)
    }
}

pub fn print_sequent(s: &Sequent) -> String {
    s.to_string()
}

// ----------------------------------------------------------------- parsing

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("lexical error at {pos}: unexpected `{ch}`")]
    Lexical { pos: usize, ch: char },
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown connective `{name}` at {pos}")]
    UnknownConnective { pos: usize, name: String },
    #[error("arity mismatch at {pos}: `{name}` expects {expected} arguments, got {got}")]
    Arity { pos: usize, name: String, expected: usize, got: usize },
    #[error("sort violation at {pos}: {msg}")]
    Sort { pos: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    And,
    Or,
    Arrow,
    Le,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1
            }
            ',' => {
                out.push((pos, Tok::Comma));
                i += 1
            }
            '&' => {
                out.push((pos, Tok::And));
                i += 1
            }
            '|' => {
                out.push((pos, Tok::Or));
                i += 1
            }
            '=' if chars.get(i + 1).map(|x| x.1) == Some('>') => {
                out.push((pos, Tok::Arrow));
                i += 2
            }
            '<' if chars.get(i + 1).map(|x| x.1) == Some('=') => {
                out.push((pos, Tok::Le));
                i += 2
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_' || chars[j].1 == '.')
                {
                    j += 1;
                }
                let word: String = chars[i..j].iter().map(|x| x.1).collect();
                out.push((pos, Tok::Ident(word)));
                i = j;
            }
            ch => return Err(ParseError::Lexical { pos, ch }),
        }
    }
    Ok(out)
}

/// Sort-free parse tree shared by sequent and rule-pattern parsing.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Raw {
    Name(usize, String),
    App(usize, String, Vec<Raw>),
    SApp(usize, Sort, String, Vec<Raw>),
    Meet(Box<Raw>, Box<Raw>),
    Join(Box<Raw>, Box<Raw>),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0).unwrap_or(self.end)
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.at += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax { pos: self.pos(), msg: format!("expected {what}") })
        }
    }

    fn term(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.meet()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            let rhs = self.meet()?;
            lhs = Raw::Join(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn meet(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.unit()?;
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            let rhs = self.unit()?;
            lhs = Raw::Meet(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn args(&mut self) -> Result<Vec<Raw>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.at += 1;
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            match self.peek() {
                Some(Tok::Comma) => self.at += 1,
                Some(Tok::RParen) => {
                    self.at += 1;
                    return Ok(args);
                }
                _ => return Err(ParseError::Syntax { pos: self.pos(), msg: "expected `,` or `)`".into() }),
            }
        }
    }

    fn unit(&mut self) -> Result<Raw, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.at += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Some(Tok::Ident(w)) => {
                self.at += 1;
                let structural =
                    w.strip_prefix("F.").map(|n| (Sort::F, n)).or_else(|| w.strip_prefix("G.").map(|n| (Sort::G, n)));
                if let Some((sort, name)) = structural {
                    let args = self.args()?;
                    return Ok(Raw::SApp(pos, sort, name.to_string(), args));
                }
                if self.peek() == Some(&Tok::LParen) {
                    let args = self.args()?;
                    Ok(Raw::App(pos, w, args))
                } else {
                    Ok(Raw::Name(pos, w))
                }
            }
            _ => Err(ParseError::Syntax { pos, msg: "expected a term".into() }),
        }
    }
}

fn parse_raw_seq(text: &str, sep: Tok) -> Result<(Raw, Raw), ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end: text.len() };
    let a = p.term()?;
    let what = if sep == Tok::Arrow { "`=>`" } else { "`<=`" };
    p.expect(sep, what)?;
    let b = p.term()?;
    if p.at != p.toks.len() {
        return Err(ParseError::Syntax { pos: p.pos(), msg: "trailing input".into() });
    }
    Ok((a, b))
}

pub(crate) fn parse_raw_sequent(text: &str) -> Result<(Raw, Raw), ParseError> {
    parse_raw_seq(text, Tok::Arrow)
}

pub(crate) fn parse_raw_term(text: &str) -> Result<Raw, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end: text.len() };
    let t = p.term()?;
    if p.at != p.toks.len() {
        return Err(ParseError::Syntax { pos: p.pos(), msg: "trailing input".into() });
    }
    Ok(t)
}

pub(crate) fn is_atom_name(w: &str) -> bool {
    crate::signature::is_ident(w)
}

/// Looks up an operational (base) connective by surface name.
pub(crate) fn operational<'a>(
    sig: &'a Signature,
    pos: usize,
    name: &str,
    got: usize,
) -> Result<&'a Connective, ParseError> {
    let c = sig
        .resolve(name)
        .filter(|c| c.is_base())
        .ok_or_else(|| ParseError::UnknownConnective { pos, name: name.to_string() })?;
    if c.arity != got {
        return Err(ParseError::Arity { pos, name: name.to_string(), expected: c.arity, got });
    }
    Ok(c)
}

pub(crate) fn structural<'a>(
    sig: &'a Signature,
    pos: usize,
    name: &str,
    sort: Sort,
    expected: Sort,
    got: usize,
) -> Result<&'a Connective, ParseError> {
    let c = sig.get(name).ok_or_else(|| ParseError::UnknownConnective { pos, name: name.to_string() })?;
    if c.family != sort {
        return Err(ParseError::Sort {
            pos,
            msg: format!("`{name}` is a {}-connective, written with prefix {sort}.", c.family),
        });
    }
    if sort != expected {
        return Err(ParseError::Sort {
            pos,
            msg: format!("{sort}-structure `{sort}.{name}` where a {expected}-structure is required"),
        });
    }
    if c.arity != got {
        return Err(ParseError::Arity { pos, name: name.to_string(), expected: c.arity, got });
    }
    Ok(c)
}

pub(crate) fn raw_formula(raw: &Raw, sig: &Signature) -> Result<Formula, ParseError> {
    Ok(match raw {
        Raw::Name(_, w) if w == "T" => Formula::Top,
        Raw::Name(_, w) if w == "B" => Formula::Bot,
        Raw::Name(pos, w) => match sig.resolve(w).filter(|c| c.is_base()) {
            Some(c) if c.arity == 0 => Formula::App(c.name.clone(), vec![]),
            Some(c) => return Err(ParseError::Arity { pos: *pos, name: w.clone(), expected: c.arity, got: 0 }),
            None if is_atom_name(w) => Formula::Atom(w.clone()),
            None => return Err(ParseError::Syntax { pos: *pos, msg: format!("`{w}` is not an atom") }),
        },
        Raw::App(pos, name, args) => {
            let c = operational(sig, *pos, name, args.len())?;
            let args = args.iter().map(|a| raw_formula(a, sig)).collect::<Result<_, _>>()?;
            Formula::App(c.name.clone(), args)
        }
        Raw::SApp(pos, ..) => {
            return Err(ParseError::Sort { pos: *pos, msg: "structural connective inside a formula".into() })
        }
        Raw::Meet(a, b) => Formula::meet(raw_formula(a, sig)?, raw_formula(b, sig)?),
        Raw::Join(a, b) => Formula::join(raw_formula(a, sig)?, raw_formula(b, sig)?),
    })
}

fn raw_structure(raw: &Raw, sig: &Signature, expected: Sort) -> Result<Structure, ParseError> {
    match raw {
        Raw::SApp(pos, sort, name, args) => {
            let c = structural(sig, *pos, name, *sort, expected, args.len())?;
            let args =
                args.iter().enumerate().map(|(i, a)| raw_structure(a, sig, c.arg_sort(i))).collect::<Result<_, _>>()?;
            Ok(Structure::SApp { sort: *sort, name: c.name.clone(), args })
        }
        other => Ok(Structure::Fml(raw_formula(other, sig)?)),
    }
}

/// Parses `x => y` against an (expanded) signature.
pub fn parse_sequent(text: &str, sig: &Signature) -> Result<Sequent, ParseError> {
    let sig = sig.expand();
    let (a, b) = parse_raw_sequent(text)?;
    Ok(Sequent::new(raw_structure(&a, &sig, Sort::F)?, raw_structure(&b, &sig, Sort::G)?))
}

/// Parses an inequality `s <= t` between formulas.
pub fn parse_inequality(text: &str, sig: &Signature) -> Result<(Formula, Formula), ParseError> {
    let (a, b) = parse_raw_seq(text, Tok::Le)?;
    Ok((raw_formula(&a, sig)?, raw_formula(&b, sig)?))
}

pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    raw_formula(&parse_raw_term(text)?, sig)
}

/// Checks the sort discipline of a structure at the expected sort.
pub fn well_sorted(s: &Structure, sig: &Signature, expected: Sort) -> bool {
    match s {
        Structure::Fml(f) => formula_ok(f, sig),
        Structure::SApp { sort, name, args } => match sig.get(name) {
            Some(c) => {
                c.family == *sort
                    && *sort == expected
                    && c.arity == args.len()
                    && args.iter().enumerate().all(|(i, a)| well_sorted(a, sig, c.arg_sort(i)))
            }
            None => false,
        },
    }
}

fn formula_ok(f: &Formula, sig: &Signature) -> bool {
    match f {
        Formula::Atom(_) | Formula::Top | Formula::Bot => true,
        Formula::Meet(a, b) | Formula::Join(a, b) => formula_ok(a, sig) && formula_ok(b, sig),
        Formula::App(n, args) => {
            matches!(sig.get(n), Some(c) if c.is_base() && c.arity == args.len())
                && args.iter().all(|a| formula_ok(a, sig))
        }
    }
}

pub fn sequent_well_sorted(s: &Sequent, sig: &Signature) -> bool {
    let sig = sig.expand();
    well_sorted(&s.ant, &sig, Sort::F) && well_sorted(&s.suc, &sig, Sort::G)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{Connective, Tone::*};

    fn fl() -> Signature {
        Signature::new([
            Connective::new("e", Sort::F, vec![]),
            Connective::new("circ", Sort::F, vec![One, One]),
            Connective::new("bslash", Sort::G, vec![Dual, One]),
            Connective::new("slash", Sort::G, vec![One, Dual]),
        ])
        .unwrap()
    }

    #[test]
    fn meet_sequent() {
        let s = parse_sequent("p & q => p", &Signature::empty()).unwrap();
        assert_eq!(s, Sequent::formulas(Formula::meet(Formula::atom("p"), Formula::atom("q")), Formula::atom("p")));
    }

    #[test]
    fn structural_vs_operational() {
        let s = parse_sequent("F.circ(p, q) => circ(p, q)", &fl()).unwrap();
        assert!(matches!(s.ant, Structure::SApp { sort: Sort::F, .. }));
        assert!(matches!(s.suc, Structure::Fml(Formula::App(..))));
        assert_eq!(complexity(&s), 2);
    }

    #[test]
    fn sort_violation_in_succedent() {
        let e = parse_sequent("p => F.circ(p,q)", &fl()).unwrap_err();
        assert!(matches!(e, ParseError::Sort { .. }), "{e}");
    }

    #[test]
    fn residual_structures_parse() {
        let s = parse_sequent("p => G.circ.r2(q, r)", &fl()).unwrap();
        assert_eq!(s.to_string(), "p => G.circ.r2(q, r)");
        let e = parse_sequent("p => G.circ.r2(G.slash(q, r), r)", &fl()).unwrap_err();
        assert!(matches!(e, ParseError::Sort { .. }));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse_sequent("p => circ(p)", &fl()).unwrap_err(),
            ParseError::Arity { pos: 5, name: "circ".into(), expected: 2, got: 1 }
        );
        assert!(matches!(parse_sequent("p => q $", &fl()), Err(ParseError::Lexical { pos: 7, .. })));
        assert!(matches!(parse_sequent("p => box(q)", &fl()), Err(ParseError::UnknownConnective { .. })));
    }

    #[test]
    fn precedence_and_printing() {
        let s = parse_sequent("p | q & r => (p | q) & r", &Signature::empty()).unwrap();
        assert_eq!(s.to_string(), "p | q & r => (p | q) & r");
        let s = parse_sequent("p & (q & r) => (p | q) | r", &Signature::empty()).unwrap();
        assert_eq!(s.to_string(), "p & (q & r) => p | q | r");
    }

    #[test]
    fn nullary_constant() {
        let s = parse_sequent("F.e() => e", &fl()).unwrap();
        assert_eq!(s.suc, Structure::Fml(Formula::app("e", vec![])));
        assert_eq!(parse_sequent(&s.to_string(), &fl()).unwrap(), s);
    }

    #[test]
    fn subterms_of_meet() {
        let s = parse_sequent("p & q => p", &Signature::empty()).unwrap();
        let (_, fs) = subterms(&s);
        assert_eq!(fs.len(), 3);
        let s = parse_sequent("p => q", &Signature::empty()).unwrap();
        let (ss, fs) = subterms(&s);
        assert_eq!((ss.len(), fs.len()), (2, 2));
    }
}
