//! Weak geodesics on prox-regular subsets of constant-curvature model spaces.
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod manifold;
pub mod proxset;
pub mod curve;
pub mod parallel;
pub mod solver;
pub mod verify;

pub use nalgebra;
pub use error::{GeoError, Result};
pub use manifold::{lipschitz_k, ManifoldModel, ModelKind, Point, TangentVector};
