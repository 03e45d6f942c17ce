//! Divergence-conforming discontinuous Galerkin discretization of box-constrained
//! distributed optimal control for the generalized Oseen equations in 2D.
//!
//! The velocity lives in BDM1 (normal-continuous, tangential continuity by
//! symmetric interior penalty), pressures and controls are piecewise constant.
//! The optimality system is solved by a primal-dual active set loop, and the
//! residual indicators drive Dörfler marking with newest-vertex bisection.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adaptivity;
pub mod assembly;
pub mod catalog;
pub mod control;
pub mod convergence;
pub mod estimate;
pub mod fem;
pub mod jet;
pub mod math;
pub mod mesh;
pub mod problem;
pub mod sparse;

pub use crate::mesh::{DomainKind, Mesh, MeshError};
pub use crate::problem::{Fields, ProblemData};
