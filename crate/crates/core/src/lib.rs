//! Semi-discrete optimal transport in the plane with quadratic cost.
//!
//! The source is a piecewise-linear density on a triangulated convex polygon
//! ([`density::TriDensity`]), the target a finite weighted point set
//! ([`geometry::TargetMeasure`]). Potentials are found with a damped Newton
//! iteration on Kantorovich's dual functional ([`solver::solve`]).
//!
//! `oracle` and `diagnostics` hold independent checks (Monte Carlo,
//! finite differences, Cheeger bounds); the solver never calls into them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod diagnostics;
pub mod functional;
pub mod geometry;
pub mod oracle;
pub mod solver;

pub use density::TriDensity;
pub use functional::{HessianMatrix, Potential};
pub use geometry::{ConvexPolygon, LaguerreDiagram, Point, TargetMeasure};
pub use solver::{solve, SolveReport, SolveStatus, SolverConfig};
