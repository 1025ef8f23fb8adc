//! Convex polygons, half-plane clipping and Laguerre (power) diagrams for
//! the quadratic cost in the plane.

pub mod cost;
mod laguerre;
mod polygon;

use thiserror::Error;

pub use laguerre::{
    laguerre_diagram, locate, EdgeTag, LaguerreCell, LaguerreDiagram, TargetMeasure,
};
pub(crate) use laguerre::argmin_power;
pub(crate) use polygon::{clip_tagged, cross};
pub use polygon::{clip_polygon, ConvexPolygon, HalfPlane};

pub type Point = nalgebra::Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain polygon is degenerate")]
    EmptyDomain,
    #[error("{potentials} potentials given for {targets} targets")]
    DimensionMismatch { potentials: usize, targets: usize },
    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("potential {0} is not finite")]
    NonFinitePotential(usize),
    #[error("target points {0} and {1} coincide")]
    CoincidentTargets(usize, usize),
    #[error("invalid target measure: {0}")]
    InvalidTargets(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
}
