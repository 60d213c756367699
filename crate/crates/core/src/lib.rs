//! Intrinsic classification of contact points of planar slow-fast systems.
//!
//! A system `X = F*Z + eps*Q + O(eps^2)` is given as the triplet `(F, Z, Q)`.
//! The crate computes the fast skewness `A`, the function `G` on the critical
//! curve, its derivatives along the normalising field `V`, the criticality
//! quantity `sigma`, and classifies contact points (jump, slow-fast Hopf,
//! singular saddle, Bogdanov-Takens) without bringing the system into normal
//! form.

// negated comparisons are how NaN is made to fail a check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod config;
pub mod expr;
pub mod geom;
pub mod invariants;
pub mod model;
pub mod report;
pub mod sim;
pub mod verify;
