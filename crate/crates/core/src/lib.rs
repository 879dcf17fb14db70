//! Bounds for the number of contingency tables, weighted integer flows and
//! volumes of transportation polytopes.
//!
//! The counting bounds come from a convex dual program over row/column
//! variables; the volume bounds come from the maximum of the product of the
//! entries over the polytope. Every bound can be checked against the exact
//! oracles in [`exact`] on small instances.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`margins`] | margin vectors, weights, the JSON problem file, cloning |
//! | [`dualopt`] | the dual program, the typical table, certified count bounds |
//! | [`polytope`] | the max-product point and volume bounds |
//! | [`scaling`] | Sinkhorn scaling, the scaling functional and its simplex integral |
//! | [`exact`] | exact counting, brute force, Ehrhart volumes |
//! | [`correlate`] | independence heuristic, entropies, attraction diagnostics |

pub mod correlate;
pub mod dualopt;
mod error;
pub mod exact;
pub mod margins;
pub mod matrix;
mod newton;
pub mod polytope;
pub mod scaling;
pub mod special;

pub use error::{Error, Result};
pub use margins::{MarginPair, ProblemSpec, WeightMatrix};
pub use matrix::Matrix;
