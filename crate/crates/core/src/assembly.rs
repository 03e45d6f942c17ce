//! Cell and face loops for the discrete forms.
//!
//! Every operator is first assembled over all `2 E` velocity dofs ("full")
//! and then restricted to the free dofs of a [`DofLayout`]. On faces the two
//! one-sided restrictions of each basis function are treated as separate
//! local functions; bilinearity makes the sum over global indices exact.

use alloc::vec;
use alloc::vec::Vec;

use crate::fem::bdm::CellBasis;
use crate::fem::layout::cell_bases;
use crate::fem::quadrature::{self, gauss_legendre, QuadratureRule};
use crate::fem::{DofLayout, FemError, ASSEMBLY_DEGREE, FACE_POINTS};
use crate::math::{self, Point, Vector};
use crate::mesh::Mesh;
use crate::problem::{Fields, ProblemData};
use crate::sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("penalty parameter must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error("dof layout does not match the mesh")]
    LayoutMismatch,
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Per-mesh cache of cell bases and quadrature rules.
pub struct Assembler<'m> {
    pub mesh: &'m Mesh,
    pub bases: Vec<CellBasis>,
    pub volume: QuadratureRule,
    pub face_s: Vec<f64>,
    pub face_w: Vec<f64>,
}

/// One side of a face: 6 global dofs, basis values at each face point and
/// gradients (constant on the cell).
struct FaceSide {
    dofs: [usize; 6],
    values: Vec<[Vector; 6]>,
    cell: usize,
}

impl<'m> Assembler<'m> {
    pub fn new(mesh: &'m Mesh) -> Result<Self, FemError> {
        let (face_s, face_w) = gauss_legendre(FACE_POINTS);
        Ok(Assembler {
            mesh,
            bases: cell_bases(mesh)?,
            volume: quadrature::triangle(ASSEMBLY_DEGREE)?,
            face_s,
            face_w,
        })
    }

    pub fn with_degree(mesh: &'m Mesh, degree: usize, face_points: usize) -> Result<Self, FemError> {
        let (face_s, face_w) = gauss_legendre(face_points);
        Ok(Assembler { mesh, bases: cell_bases(mesh)?, volume: quadrature::triangle(degree)?, face_s, face_w })
    }

    fn ndofs(&self) -> usize {
        2 * self.mesh.num_edges()
    }

    fn side(&self, t: usize, e: usize) -> FaceSide {
        let basis = &self.bases[t];
        let values = self
            .face_s
            .iter()
            .map(|&s| basis.values(basis.map.to_reference(self.mesh.edge_point(e, s))))
            .collect();
        FaceSide { dofs: DofLayout::cell_dofs(self.mesh, t), values, cell: t }
    }

    /// Full-space matrix of the SIP diffusion form.
    pub fn diffusion(&self, fields: &dyn Fields, gamma: f64) -> SparseMatrix {
        let n = self.ndofs();
        let mut out = TripletBuilder::new(n, n);
        for (t, basis) in self.bases.iter().enumerate() {
            let dofs = DofLayout::cell_dofs(self.mesh, t);
            let mut nu_int = 0.0;
            for (p, w) in self.volume.iter() {
                nu_int += w * basis.map.det * fields.viscosity(basis.map.to_physical(p));
            }
            let mut local = [[0.0; 6]; 6];
            for k in 0..6 {
                for l in k..6 {
                    let v = nu_int * math::ddot(&basis.gradients[l], &basis.gradients[k]);
                    local[k][l] = v;
                    local[l][k] = v;
                }
            }
            push_local(&mut out, &dofs, &dofs, &local);
        }
        for (e, edge) in self.mesh.edges().iter().enumerate() {
            let nrm = edge.normal;
            let h = edge.length;
            let plus = self.side(edge.plus.0, e);
            let minus = edge.minus.map(|(t, _)| self.side(t, e));
            let (funcs, dofs) = self.face_functions(&plus, minus.as_ref());
            let m = funcs.len();
            let mut local = vec![vec![0.0; m]; m];
            let boundary = minus.is_none();
            for (q, (&s, &w)) in self.face_s.iter().zip(&self.face_w).enumerate() {
                let x = self.mesh.edge_point(e, s);
                let nu = fields.viscosity(x);
                let wq = w * h;
                let (avg, pen) = if boundary { (1.0, 2.0 * gamma * nu / h) } else { (0.5, gamma * nu / h) };
                let jumps: Vec<Vector> = funcs.iter().map(|f| f.jump(q)).collect();
                let fluxes: Vec<Vector> = funcs
                    .iter()
                    .map(|f| math::scale(avg * nu, math::tmul(&self.bases[f.cell].gradients[f.local], nrm)))
                    .collect();
                for k in 0..m {
                    for l in k..m {
                        let v = wq
                            * (-(math::dot(fluxes[l], jumps[k]) + math::dot(fluxes[k], jumps[l]))
                                + pen * math::dot(jumps[k], jumps[l]));
                        local[k][l] += v;
                        if l != k {
                            local[l][k] += v;
                        }
                    }
                }
            }
            push_dense(&mut out, &dofs, &dofs, &local);
        }
        out.build()
    }

    /// Full-space matrix of the upwind convection-reaction form.
    pub fn convection(&self, fields: &dyn Fields) -> SparseMatrix {
        let n = self.ndofs();
        let mut out = TripletBuilder::new(n, n);
        for (t, basis) in self.bases.iter().enumerate() {
            let dofs = DofLayout::cell_dofs(self.mesh, t);
            let mut local = [[0.0; 6]; 6];
            for (p, w) in self.volume.iter() {
                let x = basis.map.to_physical(p);
                let wq = w * basis.map.det;
                let beta = fields.convection(x);
                let react = fields.reaction(x) - fields.convection_divergence(x);
                let vals = basis.values(p);
                for k in 0..6 {
                    let adv = math::tmul(&basis.gradients[k], beta);
                    for l in 0..6 {
                        local[k][l] += wq * (react * math::dot(vals[l], vals[k]) - math::dot(vals[l], adv));
                    }
                }
            }
            push_local(&mut out, &dofs, &dofs, &local);
        }
        for (e, edge) in self.mesh.edges().iter().enumerate() {
            let plus = self.side(edge.plus.0, e);
            let minus = edge.minus.map(|(t, _)| self.side(t, e));
            let (funcs, dofs) = self.face_functions(&plus, minus.as_ref());
            let m = funcs.len();
            let mut local = vec![vec![0.0; m]; m];
            for (q, (&s, &w)) in self.face_s.iter().zip(&self.face_w).enumerate() {
                let x = self.mesh.edge_point(e, s);
                let b = math::dot(fields.convection(x), edge.normal);
                let wq = w * edge.length;
                if minus.is_none() {
                    if b < 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        for l in 0..m {
                            local[k][l] += wq * b * math::dot(funcs[l].value(q), funcs[k].value(q));
                        }
                    }
                } else {
                    if b == 0.0 {
                        continue;
                    }
                    // trace taken from the side the flow leaves
                    let up_plus = b > 0.0;
                    for k in 0..m {
                        let jk = funcs[k].jump(q);
                        for l in 0..m {
                            if funcs[l].plus != up_plus {
                                continue;
                            }
                            local[k][l] += wq * b * math::dot(funcs[l].value(q), jk);
                        }
                    }
                }
            }
            push_dense(&mut out, &dofs, &dofs, &local);
        }
        out.build()
    }

    /// `B[t][j] = -|K_t| div phi_j`.
    pub fn divergence(&self) -> SparseMatrix {
        let mut out = TripletBuilder::new(self.mesh.num_triangles(), self.ndofs());
        for (t, basis) in self.bases.iter().enumerate() {
            let area = self.mesh.area(t);
            for (k, d) in DofLayout::cell_dofs(self.mesh, t).iter().enumerate() {
                out.push(t, *d, -area * basis.divergences[k]);
            }
        }
        out.build()
    }

    /// Velocity mass matrix, optionally weighted by a scalar field.
    pub fn mass(&self, weight: Option<&dyn Fn(Point) -> f64>) -> SparseMatrix {
        let n = self.ndofs();
        let mut out = TripletBuilder::new(n, n);
        for (t, basis) in self.bases.iter().enumerate() {
            let dofs = DofLayout::cell_dofs(self.mesh, t);
            let mut local = [[0.0; 6]; 6];
            for (p, w) in self.volume.iter() {
                let mut wq = w * basis.map.det;
                if let Some(f) = weight {
                    wq *= f(basis.map.to_physical(p));
                }
                let vals = basis.values(p);
                for k in 0..6 {
                    for l in k..6 {
                        let v = wq * math::dot(vals[l], vals[k]);
                        local[k][l] += v;
                        if l != k {
                            local[l][k] += v;
                        }
                    }
                }
            }
            push_local(&mut out, &dofs, &dofs, &local);
        }
        out.build()
    }

    /// `load[i] = int g . phi_i` over all velocity dofs.
    pub fn load(&self, g: &dyn Fn(Point) -> Vector) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs()];
        for (t, basis) in self.bases.iter().enumerate() {
            let dofs = DofLayout::cell_dofs(self.mesh, t);
            for (p, w) in self.volume.iter() {
                let wq = w * basis.map.det;
                let gv = g(basis.map.to_physical(p));
                let vals = basis.values(p);
                for k in 0..6 {
                    out[dofs[k]] += wq * math::dot(gv, vals[k]);
                }
            }
        }
        out
    }

    /// `M_u[i][2 t + c] = int_{K_t} (phi_i)_c`.
    pub fn control_coupling(&self) -> SparseMatrix {
        let mut out = TripletBuilder::new(self.ndofs(), 2 * self.mesh.num_triangles());
        for (t, basis) in self.bases.iter().enumerate() {
            let dofs = DofLayout::cell_dofs(self.mesh, t);
            let mut local = [[0.0; 2]; 6];
            for (p, w) in self.volume.iter() {
                let wq = w * basis.map.det;
                let vals = basis.values(p);
                for k in 0..6 {
                    local[k][0] += wq * vals[k][0];
                    local[k][1] += wq * vals[k][1];
                }
            }
            for k in 0..6 {
                out.push(dofs[k], 2 * t, local[k][0]);
                out.push(dofs[k], 2 * t + 1, local[k][1]);
            }
        }
        out.build()
    }

    fn face_functions<'s>(&self, plus: &'s FaceSide, minus: Option<&'s FaceSide>) -> (Vec<HalfFunction<'s>>, Vec<usize>) {
        let mut funcs = Vec::with_capacity(12);
        let mut dofs = Vec::with_capacity(12);
        for k in 0..6 {
            funcs.push(HalfFunction { side: plus, local: k, plus: true, cell: plus.cell });
            dofs.push(plus.dofs[k]);
        }
        if let Some(m) = minus {
            for k in 0..6 {
                funcs.push(HalfFunction { side: m, local: k, plus: false, cell: m.cell });
                dofs.push(m.dofs[k]);
            }
        }
        (funcs, dofs)
    }
}

struct HalfFunction<'s> {
    side: &'s FaceSide,
    local: usize,
    plus: bool,
    cell: usize,
}

impl HalfFunction<'_> {
    fn value(&self, q: usize) -> Vector {
        self.side.values[q][self.local]
    }
    /// Contribution to `v+ - v-` (equal to the trace on boundary faces).
    fn jump(&self, q: usize) -> Vector {
        let v = self.value(q);
        if self.plus { v } else { [-v[0], -v[1]] }
    }
}

fn push_local<const R: usize, const C: usize>(
    out: &mut TripletBuilder,
    rows: &[usize; R],
    cols: &[usize; C],
    local: &[[f64; C]; R],
) {
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            out.push(*r, *c, local[i][j]);
        }
    }
}

fn push_dense(out: &mut TripletBuilder, rows: &[usize], cols: &[usize], local: &[Vec<f64>]) {
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            out.push(*r, *c, local[i][j]);
        }
    }
}

fn check(mesh: &Mesh, layout: &DofLayout) -> Result<(), AssemblyError> {
    if layout.matches(mesh) { Ok(()) } else { Err(AssemblyError::LayoutMismatch) }
}

fn free_map(layout: &DofLayout) -> Vec<Option<usize>> {
    (0..layout.num_velocity()).map(|d| layout.free_index(d)).collect()
}

/// Restricts a full velocity-velocity matrix to free dofs.
pub fn restrict_square(full: &SparseMatrix, layout: &DofLayout) -> SparseMatrix {
    let map = free_map(layout);
    let n = layout.num_free_velocity();
    full.select(&map, n, &map, n)
}

/// SIP diffusion operator on the free velocity dofs.
pub fn assemble_a(mesh: &Mesh, layout: &DofLayout, data: &ProblemData) -> Result<SparseMatrix, AssemblyError> {
    check(mesh, layout)?;
    if !(data.gamma > 0.0) {
        return Err(AssemblyError::NonPositivePenalty(data.gamma));
    }
    let asm = Assembler::new(mesh)?;
    Ok(restrict_square(&asm.diffusion(&*data.fields, data.gamma), layout))
}

/// Upwind convection-reaction operator on the free velocity dofs.
pub fn assemble_o(mesh: &Mesh, layout: &DofLayout, data: &ProblemData) -> Result<SparseMatrix, AssemblyError> {
    check(mesh, layout)?;
    let asm = Assembler::new(mesh)?;
    Ok(restrict_square(&asm.convection(&*data.fields), layout))
}

/// Pressure-velocity coupling, rows are cells, columns free velocity dofs.
pub fn assemble_b(mesh: &Mesh, layout: &DofLayout) -> Result<SparseMatrix, AssemblyError> {
    check(mesh, layout)?;
    let asm = Assembler::new(mesh)?;
    let rows: Vec<Option<usize>> = (0..mesh.num_triangles()).map(Some).collect();
    Ok(asm.divergence().select(&rows, mesh.num_triangles(), &free_map(layout), layout.num_free_velocity()))
}

pub fn assemble_load(
    mesh: &Mesh,
    layout: &DofLayout,
    g: &dyn Fn(Point) -> Vector,
) -> Result<Vec<f64>, AssemblyError> {
    check(mesh, layout)?;
    let asm = Assembler::new(mesh)?;
    Ok(layout.restrict(&asm.load(g)))
}

/// Maps per-cell control pairs to velocity loads on the free dofs.
pub fn control_coupling(mesh: &Mesh, layout: &DofLayout) -> Result<SparseMatrix, AssemblyError> {
    check(mesh, layout)?;
    let asm = Assembler::new(mesh)?;
    let cols: Vec<Option<usize>> = (0..layout.num_control()).map(Some).collect();
    Ok(asm.control_coupling().select(&free_map(layout), layout.num_free_velocity(), &cols, layout.num_control()))
}

pub fn assemble_mass(mesh: &Mesh, layout: &DofLayout) -> Result<SparseMatrix, AssemblyError> {
    check(mesh, layout)?;
    let asm = Assembler::new(mesh)?;
    Ok(restrict_square(&asm.mass(None), layout))
}

/// All operators of the optimality system on one mesh.
pub struct Operators {
    pub a: SparseMatrix,
    pub o: SparseMatrix,
    pub b: SparseMatrix,
    pub mass: SparseMatrix,
    pub coupling: SparseMatrix,
    pub source: Vec<f64>,
    pub desired: Vec<f64>,
    pub areas: Vec<f64>,
}

impl Operators {
    pub fn assemble(mesh: &Mesh, layout: &DofLayout, data: &ProblemData) -> Result<Self, AssemblyError> {
        check(mesh, layout)?;
        if !(data.gamma > 0.0) {
            return Err(AssemblyError::NonPositivePenalty(data.gamma));
        }
        let asm = Assembler::new(mesh)?;
        let fields = &*data.fields;
        let map = free_map(layout);
        let nf = layout.num_free_velocity();
        let rows: Vec<Option<usize>> = (0..mesh.num_triangles()).map(Some).collect();
        let cols: Vec<Option<usize>> = (0..layout.num_control()).map(Some).collect();
        Ok(Operators {
            a: restrict_square(&asm.diffusion(fields, data.gamma), layout),
            o: restrict_square(&asm.convection(fields), layout),
            b: asm.divergence().select(&rows, mesh.num_triangles(), &map, nf),
            mass: restrict_square(&asm.mass(None), layout),
            coupling: asm.control_coupling().select(&map, nf, &cols, layout.num_control()),
            source: layout.restrict(&asm.load(&|x| fields.source(x))),
            desired: layout.restrict(&asm.load(&|x| fields.desired(x))),
            areas: (0..mesh.num_triangles()).map(|t| mesh.area(t)).collect(),
        })
    }
}
