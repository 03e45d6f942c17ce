//! Coefficients and data of the control problem.

use alloc::boxed::Box;
use alloc::sync::Arc;

use crate::fem::{quadrature, CellMap, ASSEMBLY_DEGREE};
use crate::math::{Point, Tensor, Vector};
use crate::mesh::Mesh;

/// Pointwise coefficient and data fields.
pub trait Fields: Send + Sync {
    fn viscosity(&self, x: Point) -> f64;
    fn convection(&self, x: Point) -> Vector;
    fn convection_divergence(&self, x: Point) -> f64;
    fn reaction(&self, x: Point) -> f64;
    fn source(&self, x: Point) -> Vector;
    fn desired(&self, x: Point) -> Vector;
}

type ScalarFn = Box<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(Point) -> Vector + Send + Sync>;

/// [`Fields`] backed by closures.
pub struct FnFields {
    pub viscosity: ScalarFn,
    pub convection: VectorFn,
    pub convection_divergence: ScalarFn,
    pub reaction: ScalarFn,
    pub source: VectorFn,
    pub desired: VectorFn,
}

impl FnFields {
    /// Constant coefficients with zero source and zero desired state.
    pub fn constant(nu: f64, beta: Vector, sigma: f64) -> Self {
        FnFields {
            viscosity: Box::new(move |_| nu),
            convection: Box::new(move |_| beta),
            convection_divergence: Box::new(|_| 0.0),
            reaction: Box::new(move |_| sigma),
            source: Box::new(|_| [0.0, 0.0]),
            desired: Box::new(|_| [0.0, 0.0]),
        }
    }

    pub fn with_source(mut self, f: impl Fn(Point) -> Vector + Send + Sync + 'static) -> Self {
        self.source = Box::new(f);
        self
    }

    pub fn with_desired(mut self, f: impl Fn(Point) -> Vector + Send + Sync + 'static) -> Self {
        self.desired = Box::new(f);
        self
    }

    pub fn with_viscosity(mut self, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.viscosity = Box::new(f);
        self
    }

    pub fn with_reaction(mut self, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Box::new(f);
        self
    }

    /// Sets the convection field together with its divergence.
    pub fn with_convection(
        mut self,
        beta: impl Fn(Point) -> Vector + Send + Sync + 'static,
        div: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.convection = Box::new(beta);
        self.convection_divergence = Box::new(div);
        self
    }
}

impl Fields for FnFields {
    fn viscosity(&self, x: Point) -> f64 {
        (self.viscosity)(x)
    }
    fn convection(&self, x: Point) -> Vector {
        (self.convection)(x)
    }
    fn convection_divergence(&self, x: Point) -> f64 {
        (self.convection_divergence)(x)
    }
    fn reaction(&self, x: Point) -> f64 {
        (self.reaction)(x)
    }
    fn source(&self, x: Point) -> Vector {
        (self.source)(x)
    }
    fn desired(&self, x: Point) -> Vector {
        (self.desired)(x)
    }
}

type TensorFn = Arc<dyn Fn(Point) -> Tensor + Send + Sync>;

/// Closed-form optimal state, adjoint and control.
#[derive(Clone)]
pub struct ExactSolution {
    pub y: Arc<dyn Fn(Point) -> Vector + Send + Sync>,
    pub grad_y: TensorFn,
    pub p: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub w: Arc<dyn Fn(Point) -> Vector + Send + Sync>,
    pub grad_w: TensorFn,
    pub r: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub u: Arc<dyn Fn(Point) -> Vector + Send + Sync>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("penalty parameter must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error("control cost must be positive, got {0}")]
    NonPositiveCost(f64),
    #[error("control bounds must satisfy lower < upper componentwise")]
    InvalidBounds,
    #[error("viscosity {value} at ({x}, {y}) is not positive")]
    NonPositiveViscosity { x: f64, y: f64, value: f64 },
}

/// Control bounds, control cost and penalty around a set of [`Fields`].
#[derive(Clone)]
pub struct ProblemData {
    pub fields: Arc<dyn Fields>,
    pub lower: Vector,
    pub upper: Vector,
    pub lambda: f64,
    pub gamma: f64,
}

pub const DEFAULT_PENALTY: f64 = 10.0;

impl ProblemData {
    pub fn new(
        fields: Arc<dyn Fields>,
        lower: Vector,
        upper: Vector,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self, ProblemError> {
        if !(gamma > 0.0) {
            return Err(ProblemError::NonPositivePenalty(gamma));
        }
        if !(lambda > 0.0) {
            return Err(ProblemError::NonPositiveCost(lambda));
        }
        if !(lower[0] < upper[0] && lower[1] < upper[1]) {
            return Err(ProblemError::InvalidBounds);
        }
        Ok(ProblemData { fields, lower, upper, lambda, gamma })
    }

    /// `max(min_x (sigma - div beta / 2), 0)` sampled on the volume
    /// quadrature points of `mesh`.
    pub fn kappa(&self, mesh: &Mesh) -> f64 {
        let q = quadrature::triangle(ASSEMBLY_DEGREE).expect("supported degree");
        let mut min = f64::INFINITY;
        for t in 0..mesh.num_triangles() {
            let Ok(map) = CellMap::new(mesh.corners(t)) else { continue };
            for (p, _) in q.iter() {
                let x = map.to_physical(p);
                let v = self.fields.reaction(x) - 0.5 * self.fields.convection_divergence(x);
                min = min.min(v);
            }
        }
        if min.is_finite() { min.max(0.0) } else { 0.0 }
    }

    /// Checks positivity of the viscosity at every volume quadrature point.
    pub fn validate_on(&self, mesh: &Mesh) -> Result<(), ProblemError> {
        let q = quadrature::triangle(ASSEMBLY_DEGREE).expect("supported degree");
        for t in 0..mesh.num_triangles() {
            let Ok(map) = CellMap::new(mesh.corners(t)) else { continue };
            for (p, _) in q.iter() {
                let x = map.to_physical(p);
                let value = self.fields.viscosity(x);
                if !(value > 0.0) {
                    return Err(ProblemError::NonPositiveViscosity { x: x[0], y: x[1], value });
                }
            }
        }
        Ok(())
    }

    pub fn project(&self, v: Vector) -> Vector {
        [
            self.upper[0].min(self.lower[0].max(v[0])),
            self.upper[1].min(self.lower[1].max(v[1])),
        ]
    }
}
