//! Dörfler marking and the solve, estimate, mark, refine loop.

use alloc::vec::Vec;

use crate::catalog::{BenchmarkCase, CatalogError};
use crate::control::{pdas_solve, ControlError, PdasOutcome, DEFAULT_MAX_ITER};
use crate::estimate::{total_error_and_efficiency, ErrorReport, Estimator, IndicatorField};
use crate::fem::layout::{cell_bases, cell_divergences};
use crate::fem::{DofLayout, FemError};
use crate::math::{self, Point};
use crate::mesh::{Mesh, MeshError};
use crate::problem::{ExactSolution, ProblemData, ProblemError, DEFAULT_PENALTY};

pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdaptError {
    #[error("bulk parameter must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("initial mesh already has {dofs} velocity dofs, above the budget {max_dofs}")]
    BudgetTooSmall { dofs: usize, max_dofs: usize },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Smallest set carrying a `theta` fraction of the total, chosen greedily
/// by descending value with ties going to the lower index. Returned sorted.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<Vec<usize>, AdaptError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AdaptError::InvalidTheta(theta));
    }
    let total: f64 = indicators.iter().sum();
    if !(total > 0.0) {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut acc = 0.0;
    let mut out = Vec::new();
    for i in order {
        if acc >= goal || indicators[i] <= 0.0 {
            break;
        }
        acc += indicators[i];
        out.push(i);
    }
    out.sort_unstable();
    Ok(out)
}

/// Source of wall-clock seconds; the core crate has no clock of its own.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that always reads zero.
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Everything computed on one mesh.
#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub layout: DofLayout,
    pub outcome: PdasOutcome,
    pub indicators: IndicatorField,
    pub errors: Option<ErrorReport>,
    /// Largest elementwise `|div y_h|` and `|div w_h|`.
    pub max_divergence: f64,
}

/// Solves, estimates and (if possible) measures errors on `mesh`.
pub fn solve_level(
    mesh: &Mesh,
    data: &ProblemData,
    exact: Option<&ExactSolution>,
    max_iter: usize,
) -> Result<LevelSolve, AdaptError> {
    data.validate_on(mesh)?;
    let layout = DofLayout::new(mesh);
    let outcome = pdas_solve(mesh, &layout, data, max_iter)?;
    let b = &outcome.bundle;
    let (errors, indicators) = match exact {
        Some(ex) => {
            let (r, i) = total_error_and_efficiency(mesh, data, b, ex)?;
            (Some(r), i)
        }
        None => (None, Estimator::new(mesh, data)?.indicators(b)),
    };
    let bases = cell_bases(mesh)?;
    let max_divergence = cell_divergences(mesh, &bases, &b.y)
        .into_iter()
        .chain(cell_divergences(mesh, &bases, &b.w))
        .map(math::abs)
        .fold(0.0, f64::max);
    Ok(LevelSolve { layout, outcome, indicators, errors, max_divergence })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub cells: usize,
    /// Free velocity unknowns.
    pub dofs: usize,
    pub upsilon: f64,
    pub eta_y: f64,
    pub eta_w: f64,
    pub eta_u: f64,
    pub theta_y: f64,
    pub theta_w: f64,
    pub errors: Option<ErrorReport>,
    pub pdas_iterations: usize,
    pub max_divergence: f64,
    pub marked_fraction: f64,
    pub marked_centroids: Vec<Point>,
    pub min_diameter: f64,
    pub min_diameter_at: Point,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptiveTrace {
    pub levels: Vec<LevelRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOptions {
    pub theta: f64,
    pub max_dofs: usize,
    pub gamma: f64,
    pub max_iter: usize,
    /// Hard cap on the number of levels.
    pub max_levels: usize,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        AdaptOptions { theta: DEFAULT_THETA, max_dofs: 20_000, gamma: DEFAULT_PENALTY, max_iter: DEFAULT_MAX_ITER, max_levels: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub trace: AdaptiveTrace,
    pub mesh: Mesh,
    pub last: LevelSolve,
}

/// Failure with the levels completed before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error} (after {} completed levels)", trace.levels.len())]
pub struct AdaptFailure {
    pub trace: AdaptiveTrace,
    pub error: AdaptError,
}

fn fail(trace: &AdaptiveTrace, error: impl Into<AdaptError>) -> AdaptFailure {
    AdaptFailure { trace: trace.clone(), error: error.into() }
}

/// Refines until the next mesh would exceed `max_dofs` free velocity
/// unknowns. The last solved mesh is returned with its solution.
pub fn adaptive_loop(case: &BenchmarkCase, opts: &AdaptOptions, clock: &dyn Clock) -> Result<AdaptiveRun, AdaptFailure> {
    adaptive_loop_with(case, opts, clock, &mut |_, _, _| {})
}

/// [`adaptive_loop`] calling `observe` after each level is recorded.
pub fn adaptive_loop_with(
    case: &BenchmarkCase,
    opts: &AdaptOptions,
    clock: &dyn Clock,
    observe: &mut dyn FnMut(&LevelRecord, &Mesh, &LevelSolve),
) -> Result<AdaptiveRun, AdaptFailure> {
    let mut trace = AdaptiveTrace::default();
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(fail(&trace, AdaptError::InvalidTheta(opts.theta)));
    }
    case.validate().map_err(|e| fail(&trace, e))?;
    let data = case.problem(opts.gamma).map_err(|e| fail(&trace, e))?;
    let exact = case.exact();
    let mut mesh = case.initial_mesh().map_err(|e| fail(&trace, e))?;
    let first = DofLayout::new(&mesh).num_free_velocity();
    if first > opts.max_dofs {
        return Err(fail(&trace, AdaptError::BudgetTooSmall { dofs: first, max_dofs: opts.max_dofs }));
    }
    let mut level = 0;
    loop {
        let start = clock.seconds();
        let solved = solve_level(&mesh, &data, exact.as_ref(), opts.max_iter).map_err(|e| fail(&trace, e))?;
        let ind = &solved.indicators;
        let marked = dorfler_mark(&ind.upsilon_sq(), opts.theta).map_err(|e| fail(&trace, e))?;
        let (min_diameter, min_diameter_at) = (0..mesh.num_triangles())
            .map(|t| (mesh.diameter(t), mesh.centroid(t)))
            .fold((f64::INFINITY, [0.0, 0.0]), |a, b| if b.0 < a.0 { b } else { a });
        let cells = mesh.num_triangles();
        trace.levels.push(LevelRecord {
            level,
            cells,
            dofs: solved.layout.num_free_velocity(),
            upsilon: ind.upsilon(),
            eta_y: ind.eta_y(),
            eta_w: ind.eta_w(),
            eta_u: ind.eta_u(),
            theta_y: ind.theta_y(),
            theta_w: ind.theta_w(),
            errors: solved.errors,
            pdas_iterations: solved.outcome.iterations,
            max_divergence: solved.max_divergence,
            marked_fraction: marked.len() as f64 / cells as f64,
            marked_centroids: marked.iter().map(|&t| mesh.centroid(t)).collect(),
            min_diameter,
            min_diameter_at,
            seconds: clock.seconds() - start,
        });
        observe(trace.levels.last().expect("just pushed"), &mesh, &solved);
        let next = if marked.is_empty() || level + 1 >= opts.max_levels {
            None
        } else {
            let m = mesh.bisect(&marked).map_err(|e| fail(&trace, e))?;
            (DofLayout::new(&m).num_free_velocity() <= opts.max_dofs).then_some(m)
        };
        match next {
            Some(m) => {
                mesh = m;
                level += 1;
            }
            None => return Ok(AdaptiveRun { trace, mesh, last: solved }),
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| math::ln(*v)).collect();
    let ly: Vec<f64> = y.iter().map(|v| math::ln(*v)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
