//! Conformal metrics of positive curvature with conical singularities on the
//! unit sphere: exact admissibility tests for the nonexistence-stable region
//! of cone-coefficient vectors, enumeration of the curvature-concentration
//! certificates allowed by the degeneration alternatives, and a Newton
//! continuation solver for the singular prescribed-curvature equation with
//! cross-checking diagnostics (total-curvature identity, annulus boundary
//! functional, concentration estimators, area ledger).
//!
//! The combinatorial layer ([`divisor`], [`admissibility`], [`bubbles`]) is
//! exact: coefficients are arbitrary-precision rationals and every predicate
//! is a finite set of exact (in)equalities. The numerical layer ([`grid`],
//! [`ops`], [`chart`], [`solver`], [`diagnostics`], [`lab`]) discretizes the
//! sphere with a cell-centered colatitude-longitude grid and reduces the
//! singular equation to a smooth one by splitting off the logarithmic part
//! analytically.
//!
//! Everything is pure and immutable after construction; reductions use fixed
//! summation orders, so results are reproducible across runs and safe to call
//! from concurrent threads.

pub mod admissibility;
pub mod band;
pub mod bubbles;
pub mod chart;
pub mod cli;
pub mod diagnostics;
pub mod divisor;
pub mod error;
pub mod exact;
pub mod field;
pub mod grid;
pub mod lab;
pub mod ops;
pub mod rat;
pub mod solver;

pub use admissibility::{check_report, dey_criterion, in_a_m, margin, AdmissibilityVerdict};
pub use bubbles::{
    enumerate_all, enumerate_collapse_c1, enumerate_collapse_one_level,
    enumerate_collapse_two_level, enumerate_noncollapse, oracle_enumerate, theta_of_site,
    BubbleConfig, Regime,
};
pub use divisor::{chi_pair, d1_odd_lattice, index_set, Divisor};
pub use error::{Result, SslError};
pub use rat::Rat;
