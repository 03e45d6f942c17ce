use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use divdg_core::adaptivity::{
    adaptive_loop_with, solve_level, AdaptError, AdaptOptions, AdaptiveTrace, Clock, LevelRecord, LevelSolve,
};
use divdg_core::assembly::Operators;
use divdg_core::catalog::{by_name, BenchmarkCase, CatalogError};
use divdg_core::control::ControlError;
use divdg_core::convergence::{run_convergence_with, ConvergenceRow};
use divdg_core::math;
use divdg_core::mesh::build_domain;
use divdg_core::Mesh;

use crate::config::{ConfigError, RunConfig};
use crate::output::{self, CellFields, OutputError};

/// Wall clock measured from construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error("{error}")]
    Partial { error: AdaptError, trace: AdaptiveTrace },
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn is_validation(e: &AdaptError) -> bool {
    !matches!(e, AdaptError::Control(_) | AdaptError::Fem(_) | AdaptError::Mesh(_))
        || matches!(e, AdaptError::Control(ControlError::ZeroIterations))
}

impl RunError {
    /// 2 for rejected input, 3 for solver failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Catalog(_) => 2,
            RunError::Adapt(e) | RunError::Partial { error: e, .. } => {
                if is_validation(e) {
                    2
                } else {
                    3
                }
            }
            RunError::Output(_) | RunError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.into(), source }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, RunError> {
    fs::File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// The catalog case named in `cfg`, with its control cost override.
pub fn resolve_case(cfg: &RunConfig) -> Result<BenchmarkCase, RunError> {
    cfg.validate()?;
    let mut case = by_name(&cfg.case)?;
    if let Some(l) = cfg.lambda {
        case = case.with_lambda(l);
    }
    case.validate()?;
    Ok(case)
}

fn snapshot(cfg: &RunConfig, name: &str, mesh: &Mesh, s: &LevelSolve) -> Result<(), RunError> {
    if !cfg.vtk {
        return Ok(());
    }
    let upsilon: Vec<f64> = s.indicators.upsilon_sq().into_iter().map(math::sqrt).collect();
    let fields = CellFields { bundle: &s.outcome.bundle, upsilon: &upsilon };
    output::write_vtk(mesh, &fields, &format!("{} {name}", cfg.case), &cfg.out.join(format!("{name}.vtk")))?;
    Ok(())
}

fn prepare(cfg: &RunConfig) -> Result<BenchmarkCase, RunError> {
    let case = resolve_case(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    Ok(case)
}

/// Uniform levels against the closed-form solution; writes `convergence.csv`.
pub fn run_uniform(cfg: &RunConfig, clock: &dyn Clock) -> Result<Vec<ConvergenceRow>, RunError> {
    let case = prepare(cfg)?;
    let mut io_result = Ok(());
    let rows = run_convergence_with(&case, &cfg.levels, cfg.gamma, cfg.max_iter, clock, &mut |row, mesh, s| {
        log::info!("n={} dofs={} total={:.3e} upsilon={:.3e}", row.n, row.dofs, row.errors.total, row.errors.upsilon);
        if io_result.is_ok() {
            io_result = snapshot(cfg, &format!("uniform_{:02}", row.level), mesh, s);
        }
    })?;
    io_result?;
    let path = cfg.out.join("convergence.csv");
    output::write_convergence_csv(&rows, create(&path)?)?;
    Ok(rows)
}

/// Adaptive refinement; writes `adaptive.csv` and, on failure, the levels
/// completed so far.
pub fn run_adaptive(cfg: &RunConfig, clock: &dyn Clock) -> Result<AdaptiveTrace, RunError> {
    let case = prepare(cfg)?;
    let opts = AdaptOptions {
        theta: cfg.theta,
        max_dofs: cfg.max_dofs,
        gamma: cfg.gamma,
        max_iter: cfg.max_iter,
        ..AdaptOptions::default()
    };
    let mut io_result = Ok(());
    let mut observe = |rec: &LevelRecord, mesh: &Mesh, s: &LevelSolve| {
        log::info!("level {} dofs={} upsilon={:.3e}", rec.level, rec.dofs, rec.upsilon);
        if io_result.is_ok() {
            io_result = snapshot(cfg, &format!("adaptive_{:02}", rec.level), mesh, s);
        }
    };
    let result = adaptive_loop_with(&case, &opts, clock, &mut observe);
    io_result?;
    let path = cfg.out.join("adaptive.csv");
    match result {
        Ok(run) => {
            output::write_trace_csv(&run.trace, create(&path)?)?;
            Ok(run.trace)
        }
        Err(f) => {
            output::write_trace_csv(&f.trace, create(&path)?)?;
            Err(RunError::Partial { error: f.error, trace: f.trace })
        }
    }
}

/// Single uniform mesh at the first configured level; writes `solve.csv`,
/// a VTK snapshot and optionally the operators.
pub fn run_solve(cfg: &RunConfig, clock: &dyn Clock) -> Result<LevelRecord, RunError> {
    let case = prepare(cfg)?;
    let start = clock.seconds();
    let data = case.problem(cfg.gamma).map_err(CatalogError::from)?;
    let mesh = build_domain(case.domain, cfg.levels[0]).map_err(CatalogError::from)?;
    let exact = case.exact();
    let s = solve_level(&mesh, &data, exact.as_ref(), cfg.max_iter)?;
    let ind = &s.indicators;
    let (min_diameter, min_diameter_at) = (0..mesh.num_triangles())
        .map(|t| (mesh.diameter(t), mesh.centroid(t)))
        .fold((f64::INFINITY, [0.0, 0.0]), |a, b| if b.0 < a.0 { b } else { a });
    let rec = LevelRecord {
        level: 0,
        cells: mesh.num_triangles(),
        dofs: s.layout.num_free_velocity(),
        upsilon: ind.upsilon(),
        eta_y: ind.eta_y(),
        eta_w: ind.eta_w(),
        eta_u: ind.eta_u(),
        theta_y: ind.theta_y(),
        theta_w: ind.theta_w(),
        errors: s.errors,
        pdas_iterations: s.outcome.iterations,
        max_divergence: s.max_divergence,
        marked_fraction: 0.0,
        marked_centroids: Vec::new(),
        min_diameter,
        min_diameter_at,
        seconds: clock.seconds() - start,
    };
    snapshot(cfg, "solution", &mesh, &s)?;
    if cfg.dump_matrices {
        let ops = Operators::assemble(&mesh, &s.layout, &data).map_err(|e| AdaptError::Control(e.into()))?;
        for (name, m) in [("a", &ops.a), ("o", &ops.o), ("b", &ops.b), ("mass", &ops.mass), ("coupling", &ops.coupling)] {
            let path = cfg.out.join(format!("{name}.mtx"));
            output::write_matrix_market(m, create(&path)?).map_err(io_err(&path))?;
        }
    }
    let trace = AdaptiveTrace { levels: vec![rec.clone()] };
    output::write_trace_csv(&trace, create(&cfg.out.join("solve.csv"))?)?;
    Ok(rec)
}
