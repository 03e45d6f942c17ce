//! Dense reference assembly built only from physical monomials, the
//! Radon 7-point rule and 3-point Gauss rules on edges.

#![allow(dead_code)]

use divdg_core::Mesh;

pub type Field = dyn Fn([f64; 2]) -> f64;

const SQ15: f64 = 3.872_983_346_207_417;

/// Radon's degree-5 rule on the reference triangle (weights sum to 1/2).
pub fn radon7() -> Vec<([f64; 2], f64)> {
    let a1 = (6.0 - SQ15) / 21.0;
    let b1 = (9.0 + 2.0 * SQ15) / 21.0;
    let a2 = (6.0 + SQ15) / 21.0;
    let b2 = (9.0 - 2.0 * SQ15) / 21.0;
    let w1 = (155.0 - SQ15) / 2400.0;
    let w2 = (155.0 + SQ15) / 2400.0;
    vec![
        ([1.0 / 3.0, 1.0 / 3.0], 9.0 / 80.0),
        ([a1, a1], w1),
        ([b1, a1], w1),
        ([a1, b1], w1),
        ([a2, a2], w2),
        ([b2, a2], w2),
        ([a2, b2], w2),
    ]
}

/// 3-point Gauss rule on [0, 1].
pub fn gauss3() -> [(f64, f64); 3] {
    let d = (0.6f64).sqrt() / 2.0;
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

/// A P1 vector field `v(x) = c + G x` in physical coordinates.
#[derive(Clone, Copy, Debug, Default)]
pub struct Linear {
    pub c: [f64; 2],
    pub g: [[f64; 2]; 2],
}

impl Linear {
    pub fn at(&self, x: [f64; 2]) -> [f64; 2] {
        [self.c[0] + self.g[0][0] * x[0] + self.g[0][1] * x[1], self.c[1] + self.g[1][0] * x[0] + self.g[1][1] * x[1]]
    }
    pub fn div(&self) -> f64 {
        self.g[0][0] + self.g[1][1]
    }
    fn monomial(j: usize) -> Self {
        let mut m = Linear::default();
        match j {
            0 => m.c[0] = 1.0,
            1 => m.g[0][0] = 1.0,
            2 => m.g[0][1] = 1.0,
            3 => m.c[1] = 1.0,
            4 => m.g[1][0] = 1.0,
            _ => m.g[1][1] = 1.0,
        }
        m
    }
    fn combine(coeffs: &[f64; 6]) -> Self {
        let mut out = Linear::default();
        for (j, c) in coeffs.iter().enumerate() {
            let m = Self::monomial(j);
            for a in 0..2 {
                out.c[a] += c * m.c[a];
                for b in 0..2 {
                    out.g[a][b] += c * m.g[a][b];
                }
            }
        }
        out
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn invert(mut a: [[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut inv = [[0.0; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let piv = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for k in 0..6 {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..6 {
            if r != col {
                let f = a[r][col];
                for k in 0..6 {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    inv
}

/// Global basis functions restricted to one cell: local edge `i` is
/// opposite local vertex `i`, dof `2e` is the flux through edge `e`
/// along its stored normal and `2e + 1` the first moment against the
/// local edge parameter.
pub struct OracleCell {
    pub corners: [[f64; 2]; 3],
    pub dofs: [usize; 6],
    pub basis: [Linear; 6],
    pub area: f64,
}

impl OracleCell {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let tri = mesh.triangles()[t];
        let corners = tri.map(|v| mesh.vertices()[v]);
        let edges = mesh.triangle_edges(t);
        let area = 0.5
            * ((corners[1][0] - corners[0][0]) * (corners[2][1] - corners[0][1])
                - (corners[2][0] - corners[0][0]) * (corners[1][1] - corners[0][1]));
        let mut dmat = [[0.0; 6]; 6];
        for i in 0..3 {
            let a = corners[(i + 1) % 3];
            let b = corners[(i + 2) % 3];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let outward = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            let global = mesh.edges()[edges[i]].normal;
            for j in 0..6 {
                let m = Linear::monomial(j);
                let (mut m0, mut m1) = (0.0, 0.0);
                for (s, w) in gauss3() {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let v = m.at(x);
                    m0 += w * len * dot(v, global);
                    m1 += w * len * dot(v, outward) * (s - 0.5);
                }
                dmat[2 * i][j] = m0;
                dmat[2 * i + 1][j] = m1;
            }
        }
        let inv = invert(dmat);
        let basis = core::array::from_fn(|k| Linear::combine(&core::array::from_fn(|m| inv[m][k])));
        let dofs = core::array::from_fn(|k| 2 * edges[k / 2] + k % 2);
        OracleCell { corners, dofs, basis, area }
    }

    fn physical(&self, p: [f64; 2]) -> [f64; 2] {
        let [a, b, c] = self.corners;
        [a[0] + p[0] * (b[0] - a[0]) + p[1] * (c[0] - a[0]), a[1] + p[0] * (b[1] - a[1]) + p[1] * (c[1] - a[1])]
    }

    /// Volume quadrature points and weights in physical coordinates.
    pub fn points(&self) -> Vec<([f64; 2], f64)> {
        radon7().into_iter().map(|(p, w)| (self.physical(p), 2.0 * self.area * w)).collect()
    }

    fn local(&self, dof: usize) -> Option<&Linear> {
        self.dofs.iter().position(|d| *d == dof).map(|k| &self.basis[k])
    }
}

pub struct Oracle {
    pub cells: Vec<OracleCell>,
    pub ndofs: usize,
}

/// Physical traces of every global basis function on one side of an edge.
struct Side<'a> {
    cell: &'a OracleCell,
}

impl Side<'_> {
    fn value(&self, dof: usize, x: [f64; 2]) -> [f64; 2] {
        self.cell.local(dof).map_or([0.0; 2], |f| f.at(x))
    }
    fn flux(&self, dof: usize, n: [f64; 2]) -> [f64; 2] {
        self.cell.local(dof).map_or([0.0; 2], |f| [dot(f.g[0], n), dot(f.g[1], n)])
    }
}

impl Oracle {
    pub fn new(mesh: &Mesh) -> Self {
        Oracle { cells: (0..mesh.num_triangles()).map(|t| OracleCell::new(mesh, t)).collect(), ndofs: 2 * mesh.num_edges() }
    }

    fn zeros(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.ndofs]; self.ndofs]
    }

    fn edge_points(mesh: &Mesh, e: usize) -> Vec<([f64; 2], f64)> {
        let edge = &mesh.edges()[e];
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        gauss3().iter().map(|&(s, w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * edge.length)).collect()
    }

    /// Volume part of the diffusion form on one cell, `row = test`.
    pub fn diffusion_cell(&self, t: usize, nu: &Field) -> Vec<Vec<f64>> {
        let mut out = self.zeros();
        let c = &self.cells[t];
        for (x, w) in c.points() {
            for (k, dk) in c.dofs.iter().enumerate() {
                for (l, dl) in c.dofs.iter().enumerate() {
                    let (gk, gl) = (c.basis[k].g, c.basis[l].g);
                    let ddot = gk[0][0] * gl[0][0] + gk[0][1] * gl[0][1] + gk[1][0] * gl[1][0] + gk[1][1] * gl[1][1];
                    out[*dk][*dl] += w * nu(x) * ddot;
                }
            }
        }
        out
    }

    /// Consistency, symmetry and penalty terms on one edge.
    pub fn diffusion_face(&self, mesh: &Mesh, e: usize, nu: &Field, gamma: f64) -> Vec<Vec<f64>> {
        let mut out = self.zeros();
        let edge = &mesh.edges()[e];
        let n = edge.normal;
        let plus = Side { cell: &self.cells[edge.plus.0] };
        let minus = edge.minus.map(|(t, _)| Side { cell: &self.cells[t] });
        let dofs = face_dofs(&plus, minus.as_ref());
        for (x, w) in Self::edge_points(mesh, e) {
            let nux = nu(x);
            let (avg, pen) = if minus.is_some() { (0.5, gamma * nux / edge.length) } else { (1.0, 2.0 * gamma * nux / edge.length) };
            let jump = |d: usize| {
                let p = plus.value(d, x);
                let m = minus.as_ref().map_or([0.0; 2], |m| m.value(d, x));
                [p[0] - m[0], p[1] - m[1]]
            };
            let mean_flux = |d: usize| {
                let p = plus.flux(d, n);
                let m = minus.as_ref().map_or([0.0; 2], |m| m.flux(d, n));
                [avg * nux * (p[0] + m[0]), avg * nux * (p[1] + m[1])]
            };
            for &i in &dofs {
                for &j in &dofs {
                    out[i][j] += w * (-dot(mean_flux(j), jump(i)) - dot(mean_flux(i), jump(j)) + pen * dot(jump(i), jump(j)));
                }
            }
        }
        out
    }

    /// Convective derivative plus reaction on one cell (non-conservative form).
    pub fn convection_cell(&self, t: usize, beta: [f64; 2], sigma: &Field) -> Vec<Vec<f64>> {
        let mut out = self.zeros();
        let c = &self.cells[t];
        for (x, w) in c.points() {
            for (k, dk) in c.dofs.iter().enumerate() {
                let vk = c.basis[k].at(x);
                for (l, dl) in c.dofs.iter().enumerate() {
                    let f = &c.basis[l];
                    let adv = [dot(f.g[0], beta), dot(f.g[1], beta)];
                    let u = f.at(x);
                    out[*dk][*dl] += w * (dot(adv, vk) + sigma(x) * dot(u, vk));
                }
            }
        }
        out
    }

    /// Inflow terms `|beta.n_K| (u_K - u_ext).v_K` on one edge, `u_ext = 0`
    /// on the domain boundary.
    pub fn convection_face(&self, mesh: &Mesh, e: usize, beta: [f64; 2]) -> Vec<Vec<f64>> {
        let mut out = self.zeros();
        let edge = &mesh.edges()[e];
        let b = dot(beta, edge.normal);
        if b == 0.0 {
            return out;
        }
        let plus = Side { cell: &self.cells[edge.plus.0] };
        let minus = edge.minus.map(|(t, _)| Side { cell: &self.cells[t] });
        // the cell the flow enters through this edge, and the one it leaves
        let (inside, outside) = if b < 0.0 { (Some(&plus), minus.as_ref()) } else { (minus.as_ref(), Some(&plus)) };
        let Some(inside) = inside else { return out };
        let dofs = face_dofs(&plus, minus.as_ref());
        for (x, w) in Self::edge_points(mesh, e) {
            for &i in &dofs {
                let v = inside.value(i, x);
                for &j in &dofs {
                    let ui = inside.value(j, x);
                    let ue = outside.map_or([0.0; 2], |o| o.value(j, x));
                    out[i][j] += w * b.abs() * dot([ui[0] - ue[0], ui[1] - ue[1]], v);
                }
            }
        }
        out
    }

    /// `-|K| div phi_j` for every global dof on cell `t`.
    pub fn divergence_cell(&self, t: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.ndofs];
        let c = &self.cells[t];
        for (k, d) in c.dofs.iter().enumerate() {
            row[*d] = -c.area * c.basis[k].div();
        }
        row
    }

    pub fn diffusion(&self, mesh: &Mesh, nu: &Field, gamma: f64) -> Vec<Vec<f64>> {
        let mut parts: Vec<_> = (0..self.cells.len()).map(|t| self.diffusion_cell(t, nu)).collect();
        parts.extend((0..mesh.num_edges()).map(|e| self.diffusion_face(mesh, e, nu, gamma)));
        sum(&parts, self.ndofs)
    }

    pub fn convection(&self, mesh: &Mesh, beta: [f64; 2], sigma: &Field) -> Vec<Vec<f64>> {
        let mut parts: Vec<_> = (0..self.cells.len()).map(|t| self.convection_cell(t, beta, sigma)).collect();
        parts.extend((0..mesh.num_edges()).map(|e| self.convection_face(mesh, e, beta)));
        sum(&parts, self.ndofs)
    }
}

fn face_dofs(plus: &Side, minus: Option<&Side>) -> Vec<usize> {
    let mut d: Vec<usize> = plus.cell.dofs.iter().chain(minus.iter().flat_map(|m| m.cell.dofs.iter())).copied().collect();
    d.sort_unstable();
    d.dedup();
    d
}

fn sum(parts: &[Vec<Vec<f64>>], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; n];
    for p in parts {
        for i in 0..n {
            for j in 0..n {
                out[i][j] += p[i][j];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

pub fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}
