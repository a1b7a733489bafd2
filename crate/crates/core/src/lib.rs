//! Exact path counting and Monte Carlo estimators for last-passage
//! percolation on the semi-oriented lattice `Z^d × Z_+`.
//!
//! - [`lattice`]: graph modes, vertices, paths and the seeded environment.
//! - [`counting`]: transfer-matrix DPs for `(endpoint, weight)` tables and
//!   maximal weights, a brute-force oracle, and step interchanges.
//! - [`analytic`]: the annealed exponent, binomial tails, collision
//!   probabilities and related closed forms.
//! - [`estimators`]: replicated experiments and their summaries.

pub mod analytic;
pub mod counting;
pub mod error;
pub mod estimators;
pub mod lattice;

pub use error::{LppError, Result};
