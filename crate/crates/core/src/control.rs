//! Discrete optimality system and the primal-dual active set loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::{AssemblyError, Operators};
use crate::fem::bdm::CellBasis;
use crate::fem::layout::{cell_bases, local_coeffs};
use crate::fem::{quadrature, DofLayout, FemError, ASSEMBLY_DEGREE, ERROR_DEGREE};
use crate::math::{self, Vector};
use crate::mesh::Mesh;
use crate::problem::ProblemData;
use crate::sparse::{norm2, BlockSystem, SolveError, SparseMatrix};

pub const DEFAULT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("max_iter must be at least 1")]
    ZeroIterations,
    #[error("active set did not settle in {iterations} iterations (last changes: {last_diffs:?})")]
    NoConvergence { iterations: usize, last_diffs: [usize; 2] },
}

impl From<FemError> for ControlError {
    fn from(e: FemError) -> Self {
        ControlError::Assembly(AssemblyError::Fem(e))
    }
}

/// Discrete state, adjoint and control. Velocities are full-length
/// coefficient vectors (constrained boundary dofs stored as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBundle {
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<Vector>,
}

impl SolutionBundle {
    pub fn zeros(layout: &DofLayout) -> Self {
        SolutionBundle {
            y: vec![0.0; layout.num_velocity()],
            p: vec![0.0; layout.num_pressure()],
            w: vec![0.0; layout.num_velocity()],
            r: vec![0.0; layout.num_pressure()],
            u: vec![[0.0; 2]; layout.num_pressure()],
        }
    }

    /// Controls flattened as `[u_0x, u_0y, u_1x, ...]`.
    pub fn u_flat(&self) -> Vec<f64> {
        self.u.iter().flat_map(|c| [c[0], c[1]]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Lower,
    Upper,
    Inactive,
}

/// One label per (cell, component) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSets {
    pub labels: Vec<[Label; 2]>,
}

impl ActiveSets {
    pub fn all_inactive(cells: usize) -> Self {
        ActiveSets { labels: vec![[Label::Inactive; 2]; cells] }
    }

    /// Classifies the unclamped control `-mean(w)/lambda`; ties stay inactive.
    pub fn from_candidate(candidate: &[Vector], data: &ProblemData) -> Self {
        let labels = candidate
            .iter()
            .map(|v| {
                [0, 1].map(|c| {
                    if v[c] < data.lower[c] {
                        Label::Lower
                    } else if v[c] > data.upper[c] {
                        Label::Upper
                    } else {
                        Label::Inactive
                    }
                })
            })
            .collect();
        ActiveSets { labels }
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().flatten().filter(|l| **l == label).count()
    }

    pub fn diff(&self, other: &ActiveSets) -> usize {
        self.labels.iter().flatten().zip(other.labels.iter().flatten()).filter(|(a, b)| a != b).count()
    }
}

pub fn project_control(v: Vector, lower: Vector, upper: Vector) -> Vector {
    [upper[0].min(lower[0].max(v[0])), upper[1].min(lower[1].max(v[1]))]
}

/// `(1/|K|) int_K w_h` on every cell.
pub fn cell_mean_adjoint(w: &[f64], mesh: &Mesh) -> Result<Vec<Vector>, FemError> {
    let bases = cell_bases(mesh)?;
    Ok(cell_means(w, mesh, &bases))
}

fn cell_means(w: &[f64], mesh: &Mesh, bases: &[CellBasis]) -> Vec<Vector> {
    let q = quadrature::triangle(ASSEMBLY_DEGREE).expect("supported degree");
    (0..mesh.num_triangles())
        .map(|t| {
            let c = local_coeffs(mesh, w, t);
            let mut m = [0.0; 2];
            for (p, wq) in q.iter() {
                let v = bases[t].field_value(&c, p);
                m[0] += wq * v[0];
                m[1] += wq * v[1];
            }
            // reference weights sum to 1/2
            [2.0 * m[0], 2.0 * m[1]]
        })
        .collect()
}

fn candidate(means: &[Vector], lambda: f64) -> Vec<Vector> {
    means.iter().map(|m| [-m[0] / lambda, -m[1] / lambda]).collect()
}

/// Result of [`pdas_solve`].
#[derive(Debug, Clone)]
pub struct PdasOutcome {
    pub bundle: SolutionBundle,
    pub iterations: usize,
    pub active: ActiveSets,
    /// Discrete objective after each linear solve.
    pub objective: Vec<f64>,
    /// Relative residual of the state and adjoint systems at the returned bundle.
    pub residual: f64,
}

/// Everything the PDAS loop reuses between iterations.
pub struct KktContext<'a> {
    pub mesh: &'a Mesh,
    pub layout: &'a DofLayout,
    pub data: &'a ProblemData,
    pub ops: Operators,
    bases: Vec<CellBasis>,
    k: SparseMatrix,
    kt: SparseMatrix,
    bt: SparseMatrix,
    // divergence rows without the first cell; its pressure is pinned to zero
    b_pin: SparseMatrix,
    bt_pin: SparseMatrix,
}

impl<'a> KktContext<'a> {
    pub fn new(mesh: &'a Mesh, layout: &'a DofLayout, data: &'a ProblemData) -> Result<Self, ControlError> {
        let ops = Operators::assemble(mesh, layout, data)?;
        let k = ops.a.add(&ops.o);
        let kt = k.transpose();
        let bt = ops.b.transpose();
        let nc = mesh.num_triangles();
        let rows: Vec<Option<usize>> = (0..nc).map(|t| t.checked_sub(1)).collect();
        let cols: Vec<Option<usize>> = (0..ops.b.ncols()).map(Some).collect();
        let b_pin = ops.b.select(&rows, nc.saturating_sub(1), &cols, ops.b.ncols());
        let bt_pin = b_pin.transpose();
        Ok(KktContext { mesh, layout, data, bases: cell_bases(mesh)?, ops, k, kt, bt, b_pin, bt_pin })
    }

    fn sizes(&self) -> [usize; 4] {
        let nf = self.layout.num_free_velocity();
        let np = self.mesh.num_triangles().saturating_sub(1);
        [nf, np, nf, np]
    }

    // The rows of B sum to zero (boundary normal dofs are fixed), so
    // dropping the first one loses nothing.
    fn base_system(&self, sizes: &[usize]) -> Result<BlockSystem, SolveError> {
        let names = ["y", "p", "w", "r", "u"];
        let mut s = BlockSystem::new(&names[..sizes.len()], sizes);
        let ops = &self.ops;
        s.set_block(0, 0, self.k.clone())?;
        s.set_block(0, 1, self.bt_pin.clone())?;
        s.set_block(1, 0, self.b_pin.clone())?;
        s.set_block(2, 0, ops.mass.scaled(-1.0))?;
        s.set_block(2, 2, self.kt.clone())?;
        s.set_block(2, 3, self.bt_pin.scaled(-1.0))?;
        s.set_block(3, 2, self.b_pin.clone())?;
        s.set_rhs(2, ops.desired.iter().map(|v| -v).collect())?;
        Ok(s)
    }

    /// Pinned pressure unknowns to a zero-mean cell vector.
    fn unpin(&self, q: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(q.len() + 1);
        full.push(0.0);
        full.extend_from_slice(q);
        let mean = full.iter().zip(&self.ops.areas).map(|(v, a)| v * a).sum::<f64>()
            / self.ops.areas.iter().sum::<f64>();
        full.iter().map(|v| v - mean).collect()
    }

    /// Solves the condensed system for a fixed active set. Returns the
    /// bundle with `u` set to the control used in the state equation.
    pub fn solve_active(&self, active: &ActiveSets) -> Result<SolutionBundle, ControlError> {
        let data = self.data;
        let nc = self.mesh.num_triangles();
        let mut scale = vec![0.0; 2 * nc];
        let mut fixed = vec![0.0; 2 * nc];
        for t in 0..nc {
            for c in 0..2 {
                match active.labels[t][c] {
                    Label::Inactive => scale[2 * t + c] = 1.0 / (data.lambda * self.ops.areas[t]),
                    Label::Lower => fixed[2 * t + c] = data.lower[c],
                    Label::Upper => fixed[2 * t + c] = data.upper[c],
                }
            }
        }
        let mu = &self.ops.coupling;
        let coupling = mu.scale_columns(&scale).mul_mat(&mu.transpose());
        let mut s = self.base_system(&self.sizes())?;
        s.set_block(0, 2, coupling)?;
        let load = mu.mul_vec(&fixed);
        s.set_rhs(0, self.ops.source.iter().zip(&load).map(|(a, b)| a + b).collect())?;
        let x = s.solve()?;
        let parts = s.split(&x);
        let w = self.layout.expand(&parts[2]);
        let means = cell_means(&w, self.mesh, &self.bases);
        let u = (0..nc)
            .map(|t| {
                [0, 1].map(|c| match active.labels[t][c] {
                    Label::Inactive => -means[t][c] / data.lambda,
                    _ => fixed[2 * t + c],
                })
            })
            .collect();
        Ok(SolutionBundle { y: self.layout.expand(&parts[0]), p: self.unpin(&parts[1]), w, r: self.unpin(&parts[3]), u })
    }

    /// Monolithic solve with the control as an explicit unknown and no bounds.
    pub fn solve_unconstrained(&self) -> Result<SolutionBundle, ControlError> {
        let nc = self.mesh.num_triangles();
        let mut sizes = self.sizes().to_vec();
        sizes.push(2 * nc);
        let mut s = self.base_system(&sizes)?;
        let mu = &self.ops.coupling;
        s.set_block(0, 4, mu.scaled(-1.0))?;
        s.set_block(4, 2, mu.transpose())?;
        let diag: Vec<(usize, usize, f64)> =
            (0..2 * nc).map(|i| (i, i, self.data.lambda * self.ops.areas[i / 2])).collect();
        s.set_block(4, 4, SparseMatrix::from_triplets(2 * nc, 2 * nc, diag))?;
        s.set_rhs(0, self.ops.source.clone())?;
        let x = s.solve()?;
        let parts = s.split(&x);
        let u = (0..nc).map(|t| [parts[4][2 * t], parts[4][2 * t + 1]]).collect();
        Ok(SolutionBundle {
            y: self.layout.expand(&parts[0]),
            p: self.unpin(&parts[1]),
            w: self.layout.expand(&parts[2]),
            r: self.unpin(&parts[3]),
            u,
        })
    }

    /// Relative residual of the state, divergence and adjoint equations
    /// with `u` substituted explicitly.
    pub fn residual(&self, b: &SolutionBundle) -> f64 {
        let ops = &self.ops;
        let y = self.layout.restrict(&b.y);
        let w = self.layout.restrict(&b.w);
        let mu_u = ops.coupling.mul_vec(&b.u_flat());
        let ky = self.k.mul_vec(&y);
        let btp = self.bt.mul_vec(&b.p);
        let state: Vec<f64> = (0..y.len()).map(|i| ky[i] + btp[i] - ops.source[i] - mu_u[i]).collect();
        let ktw = self.kt.mul_vec(&w);
        let btr = self.bt.mul_vec(&b.r);
        let my = ops.mass.mul_vec(&y);
        let adj: Vec<f64> = (0..w.len()).map(|i| ktw[i] - btr[i] - my[i] + ops.desired[i]).collect();
        let div_y = ops.b.mul_vec(&y);
        let div_w = ops.b.mul_vec(&w);
        let num = math::sqrt(
            [&state, &adj, &div_y, &div_w].iter().map(|v| norm2(v) * norm2(v)).sum::<f64>(),
        );
        let scale = [&ky, &btp, &ops.source, &mu_u, &ktw, &btr, &my, &ops.desired]
            .iter()
            .map(|v| norm2(v))
            .fold(0.0, f64::max);
        if scale == 0.0 { num } else { num / scale }
    }

    /// `1/2 ||y_h - y_d||^2 + lambda/2 ||u_h||^2`.
    pub fn objective(&self, b: &SolutionBundle) -> f64 {
        let q = quadrature::triangle(ERROR_DEGREE).expect("supported degree");
        let fields = &*self.data.fields;
        let mut j = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let basis = &self.bases[t];
            let c = local_coeffs(self.mesh, &b.y, t);
            for (p, wq) in q.iter() {
                let d = math::sub(basis.field_value(&c, p), fields.desired(basis.map.to_physical(p)));
                j += 0.5 * wq * basis.map.det * math::dot(d, d);
            }
            j += 0.5 * self.data.lambda * self.ops.areas[t] * math::dot(b.u[t], b.u[t]);
        }
        j
    }

    pub fn cell_means(&self, w: &[f64]) -> Vec<Vector> {
        cell_means(w, self.mesh, &self.bases)
    }

    pub fn pdas(&self, max_iter: usize) -> Result<PdasOutcome, ControlError> {
        if max_iter == 0 {
            return Err(ControlError::ZeroIterations);
        }
        let data = self.data;
        let mut active = ActiveSets::all_inactive(self.mesh.num_triangles());
        let mut objective = Vec::new();
        let mut diffs = [0usize; 2];
        for it in 1..=max_iter {
            let mut bundle = self.solve_active(&active)?;
            objective.push(self.objective(&bundle));
            let cand = candidate(&self.cell_means(&bundle.w), data.lambda);
            let next = ActiveSets::from_candidate(&cand, data);
            let changed = next.diff(&active);
            diffs = [diffs[1], changed];
            if changed == 0 {
                bundle.u = cand.iter().map(|v| project_control(*v, data.lower, data.upper)).collect();
                let residual = self.residual(&bundle);
                return Ok(PdasOutcome { bundle, iterations: it, active, objective, residual });
            }
            active = next;
        }
        Err(ControlError::NoConvergence { iterations: max_iter, last_diffs: diffs })
    }
}

pub fn pdas_solve(
    mesh: &Mesh,
    layout: &DofLayout,
    data: &ProblemData,
    max_iter: usize,
) -> Result<PdasOutcome, ControlError> {
    KktContext::new(mesh, layout, data)?.pdas(max_iter)
}
