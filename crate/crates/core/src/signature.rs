//! LE-signatures and their tense expansion.
//!
//! A signature lists the F-connectives (join-preserving in their monotone
//! coordinates) and G-connectives (meet-preserving), each with an order type.
//! [`Signature::expand`] adds the first-level residuals `f.r<i>` / `g.l<i>`
//! that the display calculus needs as structural connectives.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One entry of an order type: `1` (monotone) or `d` (antitone).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tone {
    One,
    Dual,
}

impl Tone {
    pub fn dual(self) -> Tone {
        match self {
            Tone::One => Tone::Dual,
            Tone::Dual => Tone::One,
        }
    }
}

impl Serialize for Tone {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Tone::One => s.serialize_u8(1),
            Tone::Dual => s.serialize_str("d"),
        }
    }
}

impl<'de> Deserialize<'de> for Tone {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) if n.as_u64() == Some(1) => Ok(Tone::One),
            serde_json::Value::String(s) if s == "d" || s == "1" => Ok(if s == "d" { Tone::Dual } else { Tone::One }),
            other => Err(serde::de::Error::custom(format!("order type entry must be 1 or \"d\", got {other}"))),
        }
    }
}

/// Per-coordinate order type of a connective.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct OrderType(pub Vec<Tone>);

impl OrderType {
    pub fn new(entries: Vec<Tone>) -> Self {
        OrderType(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Tone {
        self.0[i]
    }

    pub fn dual(&self) -> OrderType {
        OrderType(self.0.iter().map(|t| t.dual()).collect())
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|t| if *t == Tone::One { "1" } else { "d" }).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The two sorts of structures, which double as the two connective families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    F,
    G,
}

impl Sort {
    pub fn flip(self) -> Sort {
        match self {
            Sort::F => Sort::G,
            Sort::G => Sort::F,
        }
    }

    /// Sort of an argument with tone `t` under a connective of this family.
    pub fn under(self, t: Tone) -> Sort {
        match t {
            Tone::One => self,
            Tone::Dual => self.flip(),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::F => "F",
            Sort::G => "G",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Base,
    /// Residual of `parent` in the 1-based coordinate `coord`.
    Residual { parent: String, coord: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Connective {
    pub name: String,
    pub family: Sort,
    pub arity: usize,
    pub order_type: OrderType,
    #[serde(default, skip_serializing_if = "is_base")]
    pub origin: Origin,
}

fn is_base(o: &Origin) -> bool {
    *o == Origin::Base
}

impl Connective {
    pub fn new(name: &str, family: Sort, order_type: Vec<Tone>) -> Self {
        Connective {
            name: name.to_string(),
            family,
            arity: order_type.len(),
            order_type: OrderType(order_type),
            origin: Origin::Base,
        }
    }

    pub fn is_base(&self) -> bool {
        self.origin == Origin::Base
    }

    /// Sort of the `i`-th (0-based) argument.
    pub fn arg_sort(&self, i: usize) -> Sort {
        self.family.under(self.order_type.get(i))
    }

    /// The residual in 0-based coordinate `i`, per the tense-expansion rules.
    pub fn residual(&self, i: usize) -> Connective {
        let t = self.order_type.get(i);
        let family = match t {
            Tone::One => self.family.flip(),
            Tone::Dual => self.family,
        };
        let order_type = self
            .order_type
            .0
            .iter()
            .enumerate()
            .map(|(j, &e)| if j == i || t == Tone::Dual { e } else { e.dual() })
            .collect();
        let tag = match self.family {
            Sort::F => 'r',
            Sort::G => 'l',
        };
        Connective {
            name: format!("{}.{}{}", self.name, tag, i + 1),
            family,
            arity: self.arity,
            order_type: OrderType(order_type),
            origin: Origin::Residual { parent: self.name.clone(), coord: i + 1 },
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("connective `{0}`: duplicate name")]
    Duplicate(String),
    #[error("connective `{name}`: order-type length {len} != arity {arity}")]
    OrderTypeLength { name: String, len: usize, arity: usize },
    #[error("connective `{0}`: name must match [a-z][a-zA-Z0-9_]*")]
    BadName(String),
    #[error("alias `{0}` points to unknown connective `{1}`")]
    BadAlias(String, String),
    #[error("{0}")]
    Format(String),
}

/// An LE-signature. Connectives keep their declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    connectives: IndexMap<String, Connective>,
    aliases: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SignatureFile {
    connectives: Vec<Connective>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    aliases: BTreeMap<String, String>,
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase()) && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Signature {
    pub fn empty() -> Self {
        Signature::default()
    }

    /// Builds a signature without validating it.
    pub fn from_connectives(cs: impl IntoIterator<Item = Connective>) -> Self {
        let mut sig = Signature::default();
        for c in cs {
            sig.connectives.insert(c.name.clone(), c);
        }
        sig
    }

    /// Builds and validates.
    pub fn new(cs: impl IntoIterator<Item = Connective>) -> Result<Self, Vec<SignatureError>> {
        let list: Vec<Connective> = cs.into_iter().collect();
        let mut errs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for c in &list {
            if !seen.insert(c.name.clone()) {
                errs.push(SignatureError::Duplicate(c.name.clone()));
            }
        }
        let sig = Signature::from_connectives(list);
        errs.extend(sig.violations());
        if errs.is_empty() {
            Ok(sig)
        } else {
            Err(errs)
        }
    }

    pub fn with_alias(mut self, surface: &str, target: &str) -> Self {
        self.aliases.insert(surface.to_string(), target.to_string());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, Vec<SignatureError>> {
        let file: SignatureFile =
            serde_json::from_str(text).map_err(|e| vec![SignatureError::Format(e.to_string())])?;
        let mut list = file.connectives;
        for c in &mut list {
            c.origin = Origin::Base;
        }
        let mut sig = Signature::new(list)?;
        sig.aliases = file.aliases;
        let errs = sig.violations();
        if errs.is_empty() {
            Ok(sig)
        } else {
            Err(errs)
        }
    }

    pub fn to_json(&self) -> String {
        let file = SignatureFile { connectives: self.base().cloned().collect(), aliases: self.aliases.clone() };
        serde_json::to_string_pretty(&file).expect("signature serializes")
    }

    /// All violations of the well-formedness conditions.
    pub fn violations(&self) -> Vec<SignatureError> {
        let mut errs = Vec::new();
        for c in self.connectives.values() {
            if c.order_type.len() != c.arity {
                errs.push(SignatureError::OrderTypeLength {
                    name: c.name.clone(),
                    len: c.order_type.len(),
                    arity: c.arity,
                });
            }
            if c.is_base() && !is_ident(&c.name) {
                errs.push(SignatureError::BadName(c.name.clone()));
            }
        }
        for (a, t) in &self.aliases {
            if !self.connectives.contains_key(t) || !is_ident(a) {
                errs.push(SignatureError::BadAlias(a.clone(), t.clone()));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<(), Vec<SignatureError>> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Adds the residual of every base connective in every coordinate.
    /// Idempotent; residuals of residuals are never generated.
    pub fn expand(&self) -> Signature {
        let mut out = self.clone();
        for c in self.base() {
            for i in 0..c.arity {
                let r = c.residual(i);
                out.connectives.entry(r.name.clone()).or_insert(r);
            }
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&Connective> {
        self.connectives.get(name)
    }

    /// Resolves a surface name through the alias table.
    pub fn resolve(&self, name: &str) -> Option<&Connective> {
        self.get(name).or_else(|| self.aliases.get(name).and_then(|t| self.get(t)))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Connective> {
        self.connectives.values()
    }

    pub fn base(&self) -> impl Iterator<Item = &Connective> {
        self.connectives.values().filter(|c| c.is_base())
    }

    pub fn family(&self, fam: Sort) -> impl Iterator<Item = &Connective> {
        self.base().filter(move |c| c.family == fam)
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn len(&self) -> usize {
        self.connectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.connectives.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Tone::*;

    #[test]
    fn residual_order_types_of_mixed_binary_pair() {
        let f = Connective::new("f", Sort::F, vec![One, Dual]);
        let g = Connective::new("g", Sort::G, vec![Dual, One]);
        let f1 = f.residual(0);
        let f2 = f.residual(1);
        assert_eq!((f1.family, f1.order_type.0.clone()), (Sort::G, vec![One, One]));
        assert_eq!((f2.family, f2.order_type.0.clone()), (Sort::F, vec![One, Dual]));
        let g1 = g.residual(0);
        let g2 = g.residual(1);
        assert_eq!((g1.family, g1.order_type.0.clone()), (Sort::G, vec![Dual, One]));
        assert_eq!((g2.family, g2.order_type.0.clone()), (Sort::F, vec![One, One]));
        assert_eq!(f1.name, "f.r1");
        assert_eq!(g2.name, "g.l2");
    }

    #[test]
    fn product_residuals_match_the_two_divisions() {
        let circ = Connective::new("circ", Sort::F, vec![One, One]);
        let r1 = circ.residual(0);
        let r2 = circ.residual(1);
        // x / y and x \ y
        assert_eq!(r1.order_type.0, vec![One, Dual]);
        assert_eq!(r2.order_type.0, vec![Dual, One]);
        assert_eq!(r1.family, Sort::G);
    }

    #[test]
    fn wrong_order_type_length_is_reported() {
        let mut bad = Connective::new("circ", Sort::F, vec![One]);
        bad.arity = 2;
        let err = Signature::new([bad]).unwrap_err();
        assert!(matches!(err[0], SignatureError::OrderTypeLength { .. }));
    }

    #[test]
    fn expand_is_idempotent_and_skips_nullary() {
        let sig =
            Signature::new([Connective::new("e", Sort::F, vec![]), Connective::new("circ", Sort::F, vec![One, One])])
                .unwrap();
        let x = sig.expand();
        assert_eq!(x.len(), 4);
        assert_eq!(x.expand(), x);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"connectives":[{"name":"circ","family":"F","arity":2,"order_type":[1,1]},
            {"name":"bslash","family":"G","arity":2,"order_type":["d",1]}]}"#;
        let sig = Signature::from_json(text).unwrap();
        assert_eq!(sig.get("bslash").unwrap().order_type.0, vec![Dual, One]);
        assert_eq!(Signature::from_json(&sig.to_json()).unwrap(), sig);
    }
}
