//! Lowest-order Brezzi-Douglas-Marini element.
//!
//! Reference degrees of freedom are the normal moments on each reference edge
//! against `{1, s - 1/2}`, where `s` runs from `v[(i+1)%3]` to `v[(i+2)%3]`.
//! Local basis index `2 i + k` belongs to edge `i`, moment `k`.

use super::FemError;
use crate::math::{self, Point, Tensor, Vector};
use crate::mesh::Mesh;

/// Values and (constant) divergences of the six reference basis functions.
pub fn reference_basis(p: Point) -> ([Vector; 6], [f64; 6]) {
    let [x, y] = p;
    let values = [
        [x, y],
        [-6.0 * x, 6.0 * y],
        [x - 1.0, y],
        [6.0 * x + 12.0 * y - 6.0, -6.0 * y],
        [x, y - 1.0],
        [6.0 * x, -12.0 * x - 6.0 * y + 6.0],
    ];
    (values, [2.0, 0.0, 2.0, 0.0, 2.0, 0.0])
}

/// Reference gradients, `g[a][b] = d phi_a / d xhat_b`.
pub const REFERENCE_GRADIENTS: [Tensor; 6] = [
    [[1.0, 0.0], [0.0, 1.0]],
    [[-6.0, 0.0], [0.0, 6.0]],
    [[1.0, 0.0], [0.0, 1.0]],
    [[6.0, 12.0], [0.0, -6.0]],
    [[1.0, 0.0], [0.0, 1.0]],
    [[6.0, 0.0], [-12.0, -6.0]],
];

/// Affine map `x = x0 + J xhat` of a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMap {
    pub origin: Point,
    pub jacobian: Tensor,
    pub inverse: Tensor,
    pub det: f64,
}

impl CellMap {
    pub fn new(corners: [Point; 3]) -> Result<Self, FemError> {
        let [a, b, c] = corners;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let h2 = [math::sub(b, a), math::sub(c, a), math::sub(c, b)]
            .iter()
            .map(|d| math::dot(*d, *d))
            .fold(0.0, f64::max);
        if !(math::abs(det) >= 1e-14 * h2) || h2 == 0.0 {
            return Err(FemError::DegenerateCell(det));
        }
        let inverse = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Ok(CellMap { origin: a, jacobian: jac, inverse, det })
    }

    pub fn identity() -> Self {
        CellMap {
            origin: [0.0, 0.0],
            jacobian: [[1.0, 0.0], [0.0, 1.0]],
            inverse: [[1.0, 0.0], [0.0, 1.0]],
            det: 1.0,
        }
    }

    pub fn to_physical(&self, p: Point) -> Point {
        math::add(self.origin, math::tmul(&self.jacobian, p))
    }

    pub fn to_reference(&self, x: Point) -> Point {
        math::tmul(&self.inverse, math::sub(x, self.origin))
    }
}

/// Contravariant Piola transform: `v = J vhat / det J`, `div v = divhat vhat / det J`.
pub fn piola_map(map: &CellMap, value: Vector, divergence: f64) -> (Vector, f64) {
    let v = math::tmul(&map.jacobian, value);
    (math::scale(1.0 / map.det, v), divergence / map.det)
}

/// Gradient of a Piola-mapped field: `J ghat J^{-1} / det J`.
pub fn piola_gradient(map: &CellMap, g: &Tensor) -> Tensor {
    let j = &map.jacobian;
    let k = &map.inverse;
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for c in 0..2 {
                for d in 0..2 {
                    s += j[a][c] * g[c][d] * k[d][b];
                }
            }
            out[a][b] = s / map.det;
        }
    }
    out
}

/// Physical BDM1 basis on one mesh triangle, oriented by the global edge
/// normals so that the six local functions are restrictions of global ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBasis {
    pub map: CellMap,
    pub signs: [f64; 6],
    pub gradients: [Tensor; 6],
    pub divergences: [f64; 6],
}

impl CellBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self, FemError> {
        let map = CellMap::new(mesh.corners(t))?;
        let edge_signs = mesh.triangle_signs(t);
        let mut signs = [1.0; 6];
        for i in 0..3 {
            signs[2 * i] = edge_signs[i];
        }
        let (_, rdiv) = reference_basis([0.0, 0.0]);
        let mut gradients = [[[0.0; 2]; 2]; 6];
        let mut divergences = [0.0; 6];
        for j in 0..6 {
            let g = piola_gradient(&map, &REFERENCE_GRADIENTS[j]);
            gradients[j] = g.map(|row| row.map(|v| signs[j] * v));
            divergences[j] = signs[j] * rdiv[j] / map.det;
        }
        Ok(CellBasis { map, signs, gradients, divergences })
    }

    /// Physical basis values at the reference point `p`.
    pub fn values(&self, p: Point) -> [Vector; 6] {
        let (vals, _) = reference_basis(p);
        let mut out = [[0.0; 2]; 6];
        for j in 0..6 {
            let (v, _) = piola_map(&self.map, vals[j], 0.0);
            out[j] = math::scale(self.signs[j], v);
        }
        out
    }

    pub fn field_value(&self, coeffs: &[f64; 6], p: Point) -> Vector {
        let vals = self.values(p);
        let mut out = [0.0; 2];
        for j in 0..6 {
            out[0] += coeffs[j] * vals[j][0];
            out[1] += coeffs[j] * vals[j][1];
        }
        out
    }

    pub fn field_gradient(&self, coeffs: &[f64; 6]) -> Tensor {
        let mut out = [[0.0; 2]; 2];
        for j in 0..6 {
            for a in 0..2 {
                for b in 0..2 {
                    out[a][b] += coeffs[j] * self.gradients[j][a][b];
                }
            }
        }
        out
    }

    pub fn field_divergence(&self, coeffs: &[f64; 6]) -> f64 {
        (0..6).map(|j| coeffs[j] * self.divergences[j]).sum()
    }
}

/// Reference point on local edge `i` at parameter `s`.
pub fn reference_edge_point(i: usize, s: f64) -> Point {
    const V: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let a = V[(i + 1) % 3];
    let b = V[(i + 2) % 3];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}
