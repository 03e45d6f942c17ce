//! Reference-element machinery: quadrature, the BDM1 basis with its
//! contravariant Piola map, and the global degree-of-freedom layout.

pub mod bdm;
pub mod layout;
pub mod quadrature;

pub use bdm::{CellBasis, CellMap};
pub use layout::DofLayout;
pub use quadrature::QuadratureRule;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("no triangle rule for polynomial degree {0} (supported: 1..=10)")]
    UnsupportedDegree(usize),
    #[error("degenerate cell map (det J = {0:e})")]
    DegenerateCell(f64),
}

/// Polynomial exactness used for volume assembly terms.
pub const ASSEMBLY_DEGREE: usize = 4;
/// Polynomial exactness used for error norms and data oscillation.
pub const ERROR_DEGREE: usize = 8;
/// Gauss points per edge for face terms.
pub const FACE_POINTS: usize = 3;
