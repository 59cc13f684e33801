//! Signature-generic engine for normal lattice-expansion logics.
//!
//! * [`signature`]: LE-signatures and their residual expansion.
//! * [`syntax`]: formulas, two-sorted structures, sequents.
//! * [`calculus`]: the generated display calculus and analytic structural rules.
//! * [`classify`]: signed generation trees and analytic inductive inequalities.
//! * [`search`]: backward closure, cut-free derivability, decision procedure.
//! * [`frames`]: polarities, complex algebras, finite countermodels.
//! * [`bundles`]: the bundled logics.
//! * [`selftest`]: the acceptance suite.
//! * [`exec`]: parallel helpers with a sequential fallback.

pub mod bundles;
pub mod calculus;
pub mod classify;
pub mod exec;
pub mod frames;
pub mod search;
pub mod selftest;
pub mod signature;
pub mod syntax;

pub use signature::{Connective, Signature, Sort, Tone};
pub use syntax::{parse_sequent, Formula, Sequent, Structure};
