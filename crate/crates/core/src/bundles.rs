//! Bundled logics: signature, structural rules, identifications and quotient.
//!
//! A bundle is addressed as `name` or `name+ruleset[+ruleset..]`, for example
//! `fl-base+exchange` or `lg+grishin`.
//!
//! Residual naming per bundle:
//!
//! | bundle | residual | read as |
//! |--------|----------|---------|
//! | fl     | `circ.r1(x, y)` | `slash(x, y)` |
//! | fl     | `circ.r2(x, y)` | `bslash(x, y)` |
//! | fl     | `slash.l2(x, y)` | `bslash(y, x)` |
//! | lg     | `circ.r1`, `circ.r2` | `slcirc`, `bslcirc` |
//! | lg     | `star.l1`, `star.l2` | `slstar`, `bslstar` |
//! | ortho  | `notF.r1`, `notG.l1` | `notF`, `notG` |

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::calculus::{specs_to_rules, Alias, RuleError, RuleSchema, RuleSpec};
use crate::search::{Calculus, Quotient, Star};
use crate::signature::{Signature, SignatureError, Sort, Tone};
use crate::syntax::{parse_inequality, Formula, ParseError, Sequent, Structure};

const FILES: &[(&str, &str)] = &[
    ("lattice", include_str!("../bundles/lattice.json")),
    ("modal-epistemic", include_str!("../bundles/modal-epistemic.json")),
    ("fl-base", include_str!("../bundles/fl-base.json")),
    ("fl", include_str!("../bundles/fl.json")),
    ("lg", include_str!("../bundles/lg.json")),
    ("ortho", include_str!("../bundles/ortho.json")),
];

/// Names of the bundled logics.
pub const NAMES: &[&str] = &["lattice", "modal-epistemic", "fl-base", "fl", "lg", "ortho"];

/// Inequalities that are not analytic inductive.
pub const NON_INDUCTIVE: &[(&str, &str)] = &[("modal-epistemic", "box(dia(p)) <= dia(box(p))")];

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("unknown bundle `{0}`")]
    Unknown(String),
    #[error("bundle `{bundle}` has no rule set `{set}`")]
    UnknownRuleset { bundle: String, set: String },
    #[error("bundle file: {0}")]
    Format(String),
    #[error("signature: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Signature(Vec<SignatureError>),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("axiom `{0}`: {1}")]
    Axiom(String, ParseError),
    #[error("{0}")]
    Alias(String),
}

#[derive(Deserialize)]
struct BundleFile {
    name: String,
    signature: serde_json::Value,
    #[serde(default)]
    identify: Vec<Alias>,
    #[serde(default)]
    rules: Vec<RuleSpec>,
    #[serde(default)]
    rulesets: BTreeMap<String, Vec<RuleSpec>>,
    #[serde(default)]
    star: Option<StarFile>,
    #[serde(default)]
    axioms: Vec<String>,
    #[serde(default)]
    quotient: Option<String>,
}

#[derive(Deserialize)]
struct StarFile {
    f: String,
    g: String,
    unit: String,
}

/// A loaded bundle with its selected rule sets.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub name: String,
    pub sig: Signature,
    pub rules: Vec<RuleSchema>,
    pub aliases: Vec<Alias>,
    pub quotient: Quotient,
    /// Axioms the bundle's rules are meant to capture, as `s <= t` text.
    pub axioms: Vec<String>,
    pub rulesets: Vec<String>,
}

impl Bundle {
    /// Loads `name[+set..]`. Rules failing the analyticity check are rejected
    /// unless `unsafe_ok`.
    pub fn load_with(spec: &str, unsafe_ok: bool) -> Result<Bundle, BundleError> {
        let mut parts = spec.split('+');
        let name = parts.next().unwrap_or_default();
        let text = FILES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| BundleError::Unknown(name.to_string()))?;
        Bundle::from_json(text, parts.collect::<Vec<_>>().as_slice(), unsafe_ok)
    }

    /// Loads a bundle; contraction and other unsafe rule sets are allowed.
    pub fn load(spec: &str) -> Result<Bundle, BundleError> {
        Bundle::load_with(spec, true)
    }

    pub fn from_json(text: &str, sets: &[&str], unsafe_ok: bool) -> Result<Bundle, BundleError> {
        let file: BundleFile = serde_json::from_str(text).map_err(|e| BundleError::Format(e.to_string()))?;
        let sig = Signature::from_json(&file.signature.to_string()).map_err(BundleError::Signature)?;
        for a in &file.identify {
            a.check(&sig).map_err(BundleError::Alias)?;
        }
        let mut specs = file.rules.clone();
        let mut chosen = Vec::new();
        for set in sets {
            let expanded: Vec<&str> = if *set == "grishin" {
                file.rulesets.keys().filter(|k| k.starts_with('g')).map(String::as_str).collect()
            } else {
                vec![set]
            };
            for s in expanded {
                let list = file
                    .rulesets
                    .get(s)
                    .ok_or_else(|| BundleError::UnknownRuleset { bundle: file.name.clone(), set: s.to_string() })?;
                specs.extend(list.iter().cloned());
                chosen.push(s.to_string());
            }
        }
        let rules = specs_to_rules(&specs, &sig, unsafe_ok)?;
        let quotient = match (file.quotient.as_deref(), file.star) {
            (_, Some(st)) => Quotient::ortho(&file.identify, &sig, Star { f: st.f, g: st.g, unit: st.unit }),
            (Some("alias"), None) => Quotient::with_aliases(&file.identify, &sig),
            _ => Quotient::none(),
        };
        let name = std::iter::once(file.name.clone()).chain(chosen.iter().cloned()).collect::<Vec<_>>().join("+");
        Ok(Bundle { name, sig, rules, aliases: file.identify, quotient, axioms: file.axioms, rulesets: chosen })
    }

    /// A bundle with no structural rules over a bare signature.
    pub fn from_signature(name: &str, sig: Signature) -> Bundle {
        Bundle {
            name: name.to_string(),
            sig,
            rules: vec![],
            aliases: vec![],
            quotient: Quotient::none(),
            axioms: vec![],
            rulesets: vec![],
        }
    }

    pub fn calculus(&self) -> Calculus {
        Calculus::new(&self.name, self.sig.clone(), self.rules.clone(), self.aliases.clone(), self.quotient.clone())
    }

    /// Rule set names available for this bundle.
    pub fn available_rulesets(name: &str) -> Vec<String> {
        FILES
            .iter()
            .find(|(n, _)| *n == name)
            .and_then(|(_, t)| serde_json::from_str::<BundleFile>(t).ok())
            .map(|f| f.rulesets.into_keys().collect())
            .unwrap_or_default()
    }

    pub fn axiom_inequalities(&self) -> Result<Vec<(Formula, Formula)>, BundleError> {
        self.axioms
            .iter()
            .map(|a| parse_inequality(a, &self.sig).map_err(|e| BundleError::Axiom(a.clone(), e)))
            .collect()
    }

    /// The basic axiom sequents for the lattice operations and for every
    /// coordinate of every base connective.
    pub fn base_axioms(&self) -> Vec<Sequent> {
        base_axioms(&self.sig)
    }
}

fn fs(a: Formula, b: Formula) -> Sequent {
    Sequent::new(Structure::Fml(a), Structure::Fml(b))
}

/// Axiom sequents of the basic logic of `sig`.
pub fn base_axioms(sig: &Signature) -> Vec<Sequent> {
    let p = Formula::atom("p");
    let q = Formula::atom("q");
    let mut out = vec![
        fs(p.clone(), p.clone()),
        fs(Formula::Bot, p.clone()),
        fs(p.clone(), Formula::Top),
        fs(p.clone(), Formula::join(p.clone(), q.clone())),
        fs(q.clone(), Formula::join(p.clone(), q.clone())),
        fs(Formula::meet(p.clone(), q.clone()), p.clone()),
        fs(Formula::meet(p.clone(), q.clone()), q.clone()),
    ];
    for c in sig.base() {
        let others: Vec<Formula> = (0..c.arity).map(|j| Formula::atom(&format!("a{}", j + 1))).collect();
        let at = |i: usize, x: Formula| {
            let mut args = others.clone();
            args[i] = x;
            Formula::app(&c.name, args)
        };
        for i in 0..c.arity {
            let mono = c.order_type.get(i) == Tone::One;
            match c.family {
                Sort::F => {
                    let unit = if mono { Formula::Bot } else { Formula::Top };
                    out.push(fs(at(i, unit), Formula::Bot));
                    let split =
                        if mono { Formula::join(p.clone(), q.clone()) } else { Formula::meet(p.clone(), q.clone()) };
                    out.push(fs(at(i, split), Formula::join(at(i, p.clone()), at(i, q.clone()))));
                }
                Sort::G => {
                    let unit = if mono { Formula::Top } else { Formula::Bot };
                    out.push(fs(Formula::Top, at(i, unit)));
                    let merged =
                        if mono { Formula::meet(p.clone(), q.clone()) } else { Formula::join(p.clone(), q.clone()) };
                    out.push(fs(Formula::meet(at(i, p.clone()), at(i, q.clone())), at(i, merged)));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::check_analytic;

    #[test]
    fn every_bundle_loads_with_its_rulesets() {
        for name in NAMES {
            let b = Bundle::load_with(name, false).unwrap();
            assert!(b.axiom_inequalities().is_ok(), "{name}");
            for set in Bundle::available_rulesets(name) {
                let b = Bundle::load(&format!("{name}+{set}")).unwrap();
                for r in &b.rules {
                    assert!(check_analytic(r, &b.sig).accepted() || set == "contraction", "{}", r.name);
                }
            }
        }
    }

    #[test]
    fn grishin_selects_all_four() {
        let b = Bundle::load("lg+grishin").unwrap();
        assert_eq!(b.rulesets, ["g1", "g2", "g3", "g4"]);
        assert_eq!(b.axioms.len(), 24);
    }

    #[test]
    fn base_axioms_count() {
        let b = Bundle::load("fl-base").unwrap();
        // 7 lattice axioms, 2 per coordinate of circ, bslash, slash.
        assert_eq!(b.base_axioms().len(), 7 + 2 * 6);
    }

    #[test]
    fn unknown_ruleset_is_reported() {
        assert!(matches!(Bundle::load("fl+nope"), Err(BundleError::UnknownRuleset { .. })));
    }
}
