//! Metric-geometry toolkit for graph comparisons on finite configurations.
//!
//! The crate has two halves that check each other:
//!
//! * a constructive side ([`tree`], [`builder`]) that places six labeled
//!   points of a metric tree (or a product of metric trees) into the
//!   Euclidean plane so that the three octahedron diagonals do not shrink
//!   and the twelve edges do not grow, with exact rational arithmetic
//!   end to end;
//! * a numerical side ([`feasibility`]) that decides the same kind of
//!   graph-comparison question for arbitrary graphs and finite metrics by
//!   alternating projections onto the positive-semidefinite cone, and
//!   certifies every feasible verdict by recovering explicit coordinates.
//!
//! The [`harness`] module drives randomized campaigns over both halves,
//! and [`io`] pins the JSON wire formats used by the command-line front
//! end.

pub mod builder;
pub mod feasibility;
pub mod graphcmp;
pub mod harness;
pub mod io;
pub mod metric;
pub mod num;
pub mod tree;

pub use num::{Quad, Rat, Scalar};
