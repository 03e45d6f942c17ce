//! Uniform refinement studies against closed-form solutions.

use alloc::vec::Vec;

use crate::adaptivity::{solve_level, AdaptError, Clock, LevelSolve};
use crate::catalog::{BenchmarkCase, CatalogError};
use crate::estimate::ErrorReport;
use crate::math;
use crate::mesh::{build_domain, Mesh};

pub const DEFAULT_LEVELS: [usize; 4] = [8, 16, 32, 64];

/// Error columns that get a rate, in output order.
pub const RATE_COLUMNS: [&str; 10] = [
    "l2_y", "energy_y", "pressure_p", "l2_w", "energy_w", "pressure_r", "l2_u", "state_combined",
    "adjoint_combined", "upsilon",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub cells: usize,
    pub dofs: usize,
    pub errors: ErrorReport,
    pub pdas_iterations: usize,
    pub max_divergence: f64,
    /// `log2(e_coarse / e_fine)` against the previous row, same order as
    /// [`RATE_COLUMNS`].
    pub rates: Option<[f64; 10]>,
    pub seconds: f64,
}

impl ConvergenceRow {
    /// Values behind [`RATE_COLUMNS`].
    pub fn rated_values(&self) -> [f64; 10] {
        let e = &self.errors;
        [
            e.l2_y,
            e.energy_y,
            e.pressure_p,
            e.l2_w,
            e.energy_w,
            e.pressure_r,
            e.l2_u,
            math::sqrt(e.energy_y * e.energy_y + e.pressure_p * e.pressure_p),
            math::sqrt(e.energy_w * e.energy_w + e.pressure_r * e.pressure_r),
            e.upsilon,
        ]
    }

    pub fn rate(&self, column: &str) -> Option<f64> {
        let i = RATE_COLUMNS.iter().position(|c| *c == column)?;
        self.rates.map(|r| r[i])
    }
}

/// One uniform mesh per entry of `levels` (subdivisions per unit length).
pub fn run_convergence(
    case: &BenchmarkCase,
    levels: &[usize],
    gamma: f64,
    max_iter: usize,
    clock: &dyn Clock,
) -> Result<Vec<ConvergenceRow>, AdaptError> {
    run_convergence_with(case, levels, gamma, max_iter, clock, &mut |_, _, _| {})
}

/// [`run_convergence`] calling `observe` after each row.
pub fn run_convergence_with(
    case: &BenchmarkCase,
    levels: &[usize],
    gamma: f64,
    max_iter: usize,
    clock: &dyn Clock,
    observe: &mut dyn FnMut(&ConvergenceRow, &Mesh, &LevelSolve),
) -> Result<Vec<ConvergenceRow>, AdaptError> {
    case.validate()?;
    let exact = case.exact().ok_or(CatalogError::NoExactSolution(case.name.into()))?;
    let data = case.problem(gamma)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for (level, &n) in levels.iter().enumerate() {
        let start = clock.seconds();
        let mesh = build_domain(case.domain, n)?;
        let s = solve_level(&mesh, &data, Some(&exact), max_iter)?;
        let errors = s.errors.expect("exact solution supplied");
        let mut row = ConvergenceRow {
            level,
            n,
            h: mesh.max_diameter(),
            cells: mesh.num_triangles(),
            dofs: s.layout.num_free_velocity(),
            errors,
            pdas_iterations: s.outcome.iterations,
            max_divergence: s.max_divergence,
            rates: None,
            seconds: 0.0,
        };
        if let Some(prev) = rows.last() {
            let (a, b) = (prev.rated_values(), row.rated_values());
            let steps = math::log2(row.n as f64 / prev.n as f64);
            row.rates = Some(core::array::from_fn(|i| math::log2(a[i] / b[i]) / steps));
        }
        row.seconds = clock.seconds() - start;
        observe(&row, &mesh, &s);
        rows.push(row);
    }
    Ok(rows)
}
