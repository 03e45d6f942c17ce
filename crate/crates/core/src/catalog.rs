//! Benchmark problems and manufactured data.
//!
//! Closed-form fields are written once as functions of [`Jet`]s; every
//! derivative needed for `f` and `y_d` comes from the truncated Taylor
//! expansion and is cross-checked by central differences at construction.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::project_control;
use crate::jet::Jet;
use crate::math::{self, Point, Tensor, Vector};
use crate::mesh::{build_domain, DomainKind, Mesh, MeshError};
use crate::problem::{ExactSolution, Fields, ProblemData, ProblemError};

pub type JetFn = Arc<dyn Fn(Jet, Jet) -> Jet + Send + Sync>;
pub type PointFn = Arc<dyn Fn(Point) -> Vector + Send + Sync>;

fn jf(f: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static) -> JetFn {
    Arc::new(f)
}

fn at(f: &JetFn, x: Point) -> Jet {
    let (a, b) = Jet::variables(x);
    f(a, b)
}

/// Coefficients `nu`, `beta`, `sigma` as jet functions.
#[derive(Clone)]
pub struct Coefficients {
    pub nu: JetFn,
    pub beta: [JetFn; 2],
    pub sigma: JetFn,
}

/// Stream functions of the optimal state and adjoint velocities
/// (`v = curl psi = (d2 psi, -d1 psi)`) and their pressures.
#[derive(Clone)]
pub struct Manufactured {
    pub psi_y: JetFn,
    pub p: JetFn,
    pub psi_w: JetFn,
    pub r: JetFn,
}

#[derive(Clone)]
pub enum CaseData {
    Manufactured(Manufactured),
    Given { source: PointFn, desired: PointFn },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown case `{0}` (expected accuracy, boundary-layer, l-shape or t-shape)")]
    UnknownCase(String),
    #[error("{case}: derivative check of {term} failed at ({x}, {y}): analytic {analytic:e}, differenced {numeric:e}")]
    Derivative { case: String, term: &'static str, x: f64, y: f64, analytic: f64, numeric: f64 },
    #[error("{case}: {equation} residual {residual:e} at ({x}, {y}) exceeds tolerance")]
    Residual { case: String, equation: &'static str, x: f64, y: f64, residual: f64 },
    #[error("case `{0}` has no closed-form solution")]
    NoExactSolution(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Pointwise values of a curl field up to the viscous flux divergence.
#[derive(Debug, Clone, Copy)]
struct VelocityJet {
    v: Vector,
    grad: Tensor,
    lap: Vector,
}

fn curl(psi: &Jet) -> VelocityJet {
    let d = |i, j| psi.derivative(i, j);
    VelocityJet {
        v: [d(0, 1), -d(1, 0)],
        grad: [[d(1, 1), d(0, 2)], [-d(2, 0), -d(1, 1)]],
        lap: [d(2, 1) + d(0, 3), -(d(3, 0) + d(1, 2))],
    }
}

/// `div(nu grad v)` for a curl field.
fn viscous(nu: &Jet, v: &VelocityJet) -> Vector {
    let gn = [nu.dx(), nu.dy()];
    [0, 1].map(|a| math::dot(gn, v.grad[a]) + nu.value() * v.lap[a])
}

/// Pointwise evaluation of a manufactured case.
struct Local {
    nu: f64,
    beta: Vector,
    div_beta: f64,
    sigma: f64,
    y: VelocityJet,
    w: VelocityJet,
    visc_y: Vector,
    visc_w: Vector,
    grad_p: Vector,
    grad_r: Vector,
    u: Vector,
}

/// Coefficients plus either manufactured or given data.
struct CaseInner {
    coeffs: Coefficients,
    data: CaseData,
    lower: Vector,
    upper: Vector,
    lambda: f64,
}

impl CaseInner {
    fn local(&self, m: &Manufactured, x: Point) -> Local {
        let c = &self.coeffs;
        let nu = at(&c.nu, x);
        let b0 = at(&c.beta[0], x);
        let b1 = at(&c.beta[1], x);
        let y = curl(&at(&m.psi_y, x));
        let w = curl(&at(&m.psi_w, x));
        let p = at(&m.p, x);
        let r = at(&m.r, x);
        let u = project_control([-w.v[0] / self.lambda, -w.v[1] / self.lambda], self.lower, self.upper);
        Local {
            nu: nu.value(),
            beta: [b0.value(), b1.value()],
            div_beta: b0.dx() + b1.dy(),
            sigma: at(&c.sigma, x).value(),
            visc_y: viscous(&nu, &y),
            visc_w: viscous(&nu, &w),
            y,
            w,
            grad_p: [p.dx(), p.dy()],
            grad_r: [r.dx(), r.dy()],
            u,
        }
    }

    fn source(&self, x: Point) -> Vector {
        match &self.data {
            CaseData::Given { source, .. } => source(x),
            CaseData::Manufactured(m) => {
                let l = self.local(m, x);
                let adv = math::tmul(&l.y.grad, l.beta);
                [0, 1].map(|k| -l.visc_y[k] + adv[k] + l.sigma * l.y.v[k] + l.grad_p[k] - l.u[k])
            }
        }
    }

    fn desired(&self, x: Point) -> Vector {
        match &self.data {
            CaseData::Given { desired, .. } => desired(x),
            CaseData::Manufactured(m) => {
                let l = self.local(m, x);
                let adv = math::tmul(&l.w.grad, l.beta);
                [0, 1].map(|k| {
                    l.y.v[k] + l.visc_w[k] + adv[k] + l.grad_r[k] - (l.sigma - l.div_beta) * l.w.v[k]
                })
            }
        }
    }
}

/// [`Fields`] of a benchmark case.
#[derive(Clone)]
pub struct CaseFields(Arc<CaseInner>);

impl Fields for CaseFields {
    fn viscosity(&self, x: Point) -> f64 {
        at(&self.0.coeffs.nu, x).value()
    }
    fn convection(&self, x: Point) -> Vector {
        [at(&self.0.coeffs.beta[0], x).value(), at(&self.0.coeffs.beta[1], x).value()]
    }
    fn convection_divergence(&self, x: Point) -> f64 {
        at(&self.0.coeffs.beta[0], x).dx() + at(&self.0.coeffs.beta[1], x).dy()
    }
    fn reaction(&self, x: Point) -> f64 {
        at(&self.0.coeffs.sigma, x).value()
    }
    fn source(&self, x: Point) -> Vector {
        self.0.source(x)
    }
    fn desired(&self, x: Point) -> Vector {
        self.0.desired(x)
    }
}

/// Builds `f` and `y_d` so that the given fields solve the optimality
/// system with the clamped control `u* = P(-w / lambda)`.
pub fn derive_manufactured_data(
    coeffs: Coefficients,
    exact: Manufactured,
    lower: Vector,
    upper: Vector,
    lambda: f64,
) -> CaseFields {
    CaseFields(Arc::new(CaseInner { coeffs, data: CaseData::Manufactured(exact), lower, upper, lambda }))
}

#[derive(Clone)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub domain: DomainKind,
    /// Subdivisions of the initial adaptive mesh.
    pub initial_subdivisions: usize,
    pub lower: Vector,
    pub upper: Vector,
    pub lambda: f64,
    pub coefficients: Coefficients,
    pub data: CaseData,
}

pub const CASE_NAMES: [&str; 4] = ["accuracy", "boundary-layer", "l-shape", "t-shape"];

fn polynomial_grid_case() -> Coefficients {
    Coefficients {
        nu: jf(|x, _| 1.0 + 0.01 * x * x),
        beta: [jf(|x, _| x * x), jf(|_, y| y * y)],
        sigma: jf(|_, _| Jet::constant(1.0)),
    }
}

/// Smooth solution on the unit square.
pub fn accuracy() -> BenchmarkCase {
    let two_pi = 2.0 * PI;
    BenchmarkCase {
        name: "accuracy",
        domain: DomainKind::UnitSquare,
        initial_subdivisions: 4,
        lower: [-0.5, -0.5],
        upper: [0.5, 0.5],
        lambda: 1.0,
        coefficients: polynomial_grid_case(),
        data: CaseData::Manufactured(Manufactured {
            psi_y: jf(|x, y| (x * (1.0 - x) * y * (1.0 - y)).powi(2)),
            p: jf(move |x, y| (two_pi * x).cos() * (two_pi * y).cos()),
            psi_w: jf(move |x, y| ((two_pi * x).sin() * (two_pi * y).sin()).powi(2)),
            r: jf(move |x, y| (two_pi * x).cos() * (two_pi * y).cos()),
        }),
    }
}

/// Layers along both legs of the unit triangle.
pub fn boundary_layer() -> BenchmarkCase {
    let two_pi = 2.0 * PI;
    let e100 = math::exp(-100.0);
    let layer = move |s: Jet| 1.0 - s - ((-100.0 * s).exp() - e100) / (1.0 - e100);
    BenchmarkCase {
        name: "boundary-layer",
        domain: DomainKind::UnitTriangle,
        initial_subdivisions: 4,
        lower: [0.0, 0.0],
        upper: [0.1, 0.1],
        lambda: 1.0,
        coefficients: Coefficients {
            nu: jf(|x, y| 0.01 * (-(x * x) - y * y).exp()),
            beta: [jf(|x, _| x), jf(|_, y| -y)],
            sigma: jf(|_, _| Jet::constant(1.0)),
        },
        data: CaseData::Manufactured(Manufactured {
            psi_y: jf(move |x, y| x * y * y * (1.0 - x - y).powi(2) * layer(x)),
            p: jf(move |_, y| (two_pi * y).cos() / 1024.0),
            psi_w: jf(move |x, y| x * x * y * (1.0 - x - y).powi(2) * layer(y)),
            r: jf(move |x, _| (two_pi * x).cos() / 1024.0),
        }),
    }
}

fn corner_case(name: &'static str, domain: DomainKind) -> BenchmarkCase {
    BenchmarkCase {
        name,
        domain,
        initial_subdivisions: 2,
        lower: [0.0, 0.0],
        upper: [0.1, 0.1],
        lambda: 1.0,
        coefficients: Coefficients {
            nu: jf(|_, _| Jet::constant(1.0)),
            beta: [jf(|x, _| x), jf(|_, y| y)],
            sigma: jf(|_, _| Jet::constant(0.0)),
        },
        data: CaseData::Given { source: Arc::new(|_| [1.0, 1.0]), desired: Arc::new(|x| [x[1], -x[1]]) },
    }
}

pub fn l_shape() -> BenchmarkCase {
    corner_case("l-shape", DomainKind::LShape)
}

pub fn t_shape() -> BenchmarkCase {
    corner_case("t-shape", DomainKind::TShape)
}

pub fn catalog() -> Vec<BenchmarkCase> {
    alloc::vec![accuracy(), boundary_layer(), l_shape(), t_shape()]
}

pub fn by_name(name: &str) -> Result<BenchmarkCase, CatalogError> {
    match name {
        "accuracy" => Ok(accuracy()),
        "boundary-layer" => Ok(boundary_layer()),
        "l-shape" => Ok(l_shape()),
        "t-shape" => Ok(t_shape()),
        other => Err(CatalogError::UnknownCase(String::from(other))),
    }
}

/// Step and tolerance of the derivative cross-check.
pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const CHECK_POINTS: usize = 50;
// identically zero terms are judged against differencing noise
const SCALE_FLOOR: f64 = 1e-4;

impl BenchmarkCase {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn has_exact(&self) -> bool {
        matches!(self.data, CaseData::Manufactured(_))
    }

    fn inner(&self) -> CaseInner {
        CaseInner {
            coeffs: self.coefficients.clone(),
            data: self.data.clone(),
            lower: self.lower,
            upper: self.upper,
            lambda: self.lambda,
        }
    }

    pub fn fields(&self) -> CaseFields {
        CaseFields(Arc::new(self.inner()))
    }

    pub fn problem(&self, gamma: f64) -> Result<ProblemData, ProblemError> {
        ProblemData::new(Arc::new(self.fields()), self.lower, self.upper, self.lambda, gamma)
    }

    pub fn initial_mesh(&self) -> Result<Mesh, MeshError> {
        build_domain(self.domain, self.initial_subdivisions)
    }

    pub fn exact(&self) -> Option<ExactSolution> {
        let CaseData::Manufactured(m) = &self.data else { return None };
        let vel = |psi: &JetFn| {
            let a = psi.clone();
            let b = psi.clone();
            let v: Arc<dyn Fn(Point) -> Vector + Send + Sync> = Arc::new(move |x| curl(&at(&a, x)).v);
            let g: Arc<dyn Fn(Point) -> Tensor + Send + Sync> = Arc::new(move |x| curl(&at(&b, x)).grad);
            (v, g)
        };
        let scalar = |f: &JetFn| {
            let f = f.clone();
            let s: Arc<dyn Fn(Point) -> f64 + Send + Sync> = Arc::new(move |x| at(&f, x).value());
            s
        };
        let (y, grad_y) = vel(&m.psi_y);
        let (w, grad_w) = vel(&m.psi_w);
        let psi_w = m.psi_w.clone();
        let (lower, upper, lambda) = (self.lower, self.upper, self.lambda);
        let u: Arc<dyn Fn(Point) -> Vector + Send + Sync> = Arc::new(move |x| {
            let w = curl(&at(&psi_w, x)).v;
            project_control([-w[0] / lambda, -w[1] / lambda], lower, upper)
        });
        Some(ExactSolution { y, grad_y, p: scalar(&m.p), w, grad_w, r: scalar(&m.r), u })
    }

    /// Deterministic interior sample points.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lo, hi] = self.domain.bounding_box();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
            // keep away from the boundary so the differencing stencil stays inside
            let margin = 1e-3;
            let inside = [[-margin, 0.0], [margin, 0.0], [0.0, -margin], [0.0, margin]]
                .iter()
                .all(|d| self.domain.contains(math::add(x, *d)));
            if inside {
                out.push(x);
            }
        }
        out
    }

    /// Cross-checks every derivative by central differences and evaluates
    /// both strong residuals. Cases without closed-form solutions pass.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let CaseData::Manufactured(m) = &self.data else { return Ok(()) };
        let inner = self.inner();
        let pts = self.sample_points(CHECK_POINTS, 0x5eed);
        let h = FD_STEP;
        let name = || String::from(self.name);
        // per-term scales so that near-zero values are judged against the field size
        let mut checks: Vec<(&'static str, Point, f64, f64)> = Vec::new();
        let shift = |x: Point, k: usize, s: f64| if k == 0 { [x[0] + s, x[1]] } else { [x[0], x[1] + s] };
        for &x in &pts {
            let l = inner.local(m, x);
            for (term, psi, vj, visc) in
                [("grad y", &m.psi_y, l.y, l.visc_y), ("grad w", &m.psi_w, l.w, l.visc_w)]
            {
                for k in 0..2 {
                    let plus = curl(&at(psi, shift(x, k, h))).v;
                    let minus = curl(&at(psi, shift(x, k, -h))).v;
                    for a in 0..2 {
                        checks.push((term, x, vj.grad[a][k], (plus[a] - minus[a]) / (2.0 * h)));
                    }
                }
                let flux = |z: Point, a: usize, k: usize| at(&self.coefficients.nu, z).value() * curl(&at(psi, z)).grad[a][k];
                let vterm = if term == "grad y" { "div(nu grad y)" } else { "div(nu grad w)" };
                for a in 0..2 {
                    let fd: f64 = (0..2)
                        .map(|k| (flux(shift(x, k, h), a, k) - flux(shift(x, k, -h), a, k)) / (2.0 * h))
                        .sum();
                    checks.push((vterm, x, visc[a], fd));
                }
            }
            for (term, f, g) in [("grad p", &m.p, l.grad_p), ("grad r", &m.r, l.grad_r)] {
                for k in 0..2 {
                    let fd = (at(f, shift(x, k, h)).value() - at(f, shift(x, k, -h)).value()) / (2.0 * h);
                    checks.push((term, x, g[k], fd));
                }
            }
            let b = &self.coefficients.beta;
            let fd_div: f64 = (0..2)
                .map(|k| (at(&b[k], shift(x, k, h)).value() - at(&b[k], shift(x, k, -h)).value()) / (2.0 * h))
                .sum();
            checks.push(("div beta", x, l.div_beta, fd_div));
        }
        let mut scales: Vec<(&'static str, f64)> = Vec::new();
        for (term, _, a, _) in &checks {
            match scales.iter_mut().find(|(t, _)| t == term) {
                Some((_, s)) => *s = s.max(math::abs(*a)),
                None => scales.push((term, math::abs(*a))),
            }
        }
        for (term, x, analytic, numeric) in &checks {
            let scale = scales.iter().find(|(t, _)| t == term).map_or(1.0, |s| s.1).max(SCALE_FLOOR);
            if math::abs(analytic - numeric) > FD_TOLERANCE * scale.max(math::abs(*analytic)) {
                return Err(CatalogError::Derivative {
                    case: name(),
                    term,
                    x: x[0],
                    y: x[1],
                    analytic: *analytic,
                    numeric: *numeric,
                });
            }
        }
        // strong residuals with the differenced viscous and pressure terms
        for &x in &pts {
            let l = inner.local(m, x);
            let f = inner.source(x);
            let yd = inner.desired(x);
            let fd_visc = |psi: &JetFn| {
                let flux = |z: Point, a: usize, k: usize| {
                    at(&self.coefficients.nu, z).value() * curl(&at(psi, z)).grad[a][k]
                };
                [0, 1].map(|a| {
                    (0..2).map(|k| (flux(shift(x, k, h), a, k) - flux(shift(x, k, -h), a, k)) / (2.0 * h)).sum::<f64>()
                })
            };
            let fd_grad = |g: &JetFn| [0, 1].map(|k| (at(g, shift(x, k, h)).value() - at(g, shift(x, k, -h)).value()) / (2.0 * h));
            let vy = fd_visc(&m.psi_y);
            let vw = fd_visc(&m.psi_w);
            let gp = fd_grad(&m.p);
            let gr = fd_grad(&m.r);
            let ay = math::tmul(&l.y.grad, l.beta);
            let aw = math::tmul(&l.w.grad, l.beta);
            for k in 0..2 {
                let terms = [-vy[k], ay[k], l.sigma * l.y.v[k], gp[k], -f[k], -l.u[k]];
                let res: f64 = terms.iter().sum();
                let size: f64 = terms.iter().map(|t| math::abs(*t)).sum::<f64>().max(1e-300);
                if math::abs(res) > RESIDUAL_TOLERANCE * size {
                    return Err(CatalogError::Residual { case: name(), equation: "state", x: x[0], y: x[1], residual: res / size });
                }
                let terms = [-vw[k], -aw[k], (l.sigma - l.div_beta) * l.w.v[k], -gr[k], -l.y.v[k], yd[k]];
                let res: f64 = terms.iter().sum();
                let size: f64 = terms.iter().map(|t| math::abs(*t)).sum::<f64>().max(1e-300);
                if math::abs(res) > RESIDUAL_TOLERANCE * size {
                    return Err(CatalogError::Residual { case: name(), equation: "adjoint", x: x[0], y: x[1], residual: res / size });
                }
            }
            let _ = l.nu;
        }
        Ok(())
    }
}
