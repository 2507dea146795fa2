//! Leakage-minimizing design of one row of an information-theoretic channel.
//!
//! A [`qif::Channel`] maps secrets to observables. One secret `s` controls its
//! own row `q`, subject to a [`feasibility::FeasibleSet`]. The crate computes
//! leakage and capacity for exact-guessing and s-distinguishing adversaries,
//! optimal rows via linear programming, smallest-enclosing-ball rows, and
//! evaluates them on website-fingerprinting style corpora.

pub mod attack;
pub mod bench;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod feasibility;
pub mod io;
pub mod lp;
pub mod optimizer;
pub mod predicate;
pub mod qif;
pub mod sampling;
pub mod seb;

pub use error::{Error, Result};
pub use feasibility::FeasibleSet;
pub use qif::{Adversary, AdversaryKind, Channel, Mode, Prior};
