//! Coupled 0D/2D Poisson solver for a single-bend channel with an
//! equilibrated-flux error estimator and a doubly adaptive driver.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod adapt;
pub mod dense;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod flux;
pub mod format;
pub mod geometry;
pub mod linsolve;
pub mod mesh;
pub mod point;
pub mod quadrature;
pub mod reference;
pub mod scalar;

pub use error::{Error, Result};
pub use geometry::{BoundaryLabel, ChannelGeometry, InterfaceConfig, LabeledPolygon};
pub use mesh::TriMesh;
pub use point::Vec2;
pub use scalar::Real;

/// Double-precision aliases for the common types.
pub type Geometry = ChannelGeometry<f64>;
pub type Mesh = TriMesh<f64>;
pub type Point = Vec2<f64>;
pub type Solution = fem::CoupledSolution<f64>;
pub type Report = estimator::EstimatorReport<f64>;
pub type Config = adapt::AdaptiveConfig<f64>;
