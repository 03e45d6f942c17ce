use alloc::vec;
use alloc::vec::Vec;

use super::bdm::CellBasis;
use super::quadrature::gauss_legendre;
use super::FemError;
use crate::math::{self, Point, Vector};
use crate::mesh::Mesh;

/// Degree-of-freedom maps for BDM1 velocity, P0 pressure and P0 control.
///
/// Velocity dof `2 e + k` is the `k`-th normal moment on global edge `e`.
/// Dofs on boundary edges are fixed to zero and excluded from the free set.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    num_edges: usize,
    num_cells: usize,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
}

impl DofLayout {
    pub fn new(mesh: &Mesh) -> Self {
        let mut free_index = vec![None; 2 * mesh.num_edges()];
        let mut free_dofs = Vec::with_capacity(2 * mesh.num_interior_edges());
        for (e, edge) in mesh.edges().iter().enumerate() {
            if !edge.is_boundary() {
                for k in 0..2 {
                    free_index[2 * e + k] = Some(free_dofs.len());
                    free_dofs.push(2 * e + k);
                }
            }
        }
        DofLayout { num_edges: mesh.num_edges(), num_cells: mesh.num_triangles(), free_index, free_dofs }
    }

    pub fn matches(&self, mesh: &Mesh) -> bool {
        self.num_edges == mesh.num_edges() && self.num_cells == mesh.num_triangles()
    }

    /// All velocity dofs, including constrained boundary ones.
    pub fn num_velocity(&self) -> usize {
        2 * self.num_edges
    }
    pub fn num_free_velocity(&self) -> usize {
        self.free_dofs.len()
    }
    pub fn num_pressure(&self) -> usize {
        self.num_cells
    }
    pub fn num_control(&self) -> usize {
        2 * self.num_cells
    }
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }
    pub fn is_constrained(&self, dof: usize) -> bool {
        self.free_index[dof].is_none()
    }

    pub fn cell_dofs(mesh: &Mesh, t: usize) -> [usize; 6] {
        let [e0, e1, e2] = mesh.triangle_edges(t);
        [2 * e0, 2 * e0 + 1, 2 * e1, 2 * e1 + 1, 2 * e2, 2 * e2 + 1]
    }

    /// Scatters a free-dof vector into a full velocity vector (boundary dofs zero).
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_velocity()];
        for (i, &d) in self.free_dofs.iter().enumerate() {
            full[d] = free[i];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

pub fn local_coeffs(mesh: &Mesh, full: &[f64], t: usize) -> [f64; 6] {
    DofLayout::cell_dofs(mesh, t).map(|d| full[d])
}

/// Canonical BDM1 interpolant: normal moments of `f` on every edge.
pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> Vector) -> Vec<f64> {
    let (s, w) = gauss_legendre(6);
    let mut out = vec![0.0; 2 * mesh.num_edges()];
    for (e, edge) in mesh.edges().iter().enumerate() {
        let mut m = [0.0; 2];
        for (s, w) in s.iter().zip(&w) {
            let fv = math::dot(f(mesh.edge_point(e, *s)), edge.normal);
            m[0] += w * fv;
            m[1] += w * fv * (s - 0.5);
        }
        out[2 * e] = m[0] * edge.length;
        out[2 * e + 1] = m[1] * edge.length;
    }
    out
}

/// Per-cell bases for a whole mesh.
pub fn cell_bases(mesh: &Mesh) -> Result<Vec<CellBasis>, FemError> {
    (0..mesh.num_triangles()).map(|t| CellBasis::new(mesh, t)).collect()
}

/// Elementwise (constant) divergence of a full velocity vector.
pub fn cell_divergences(mesh: &Mesh, bases: &[CellBasis], full: &[f64]) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|t| bases[t].field_divergence(&local_coeffs(mesh, full, t)))
        .collect()
}
