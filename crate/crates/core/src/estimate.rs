//! Error norms against closed-form solutions and residual indicators.
//!
//! Indicator components are stored squared. Data enter the residuals through
//! elementwise L2 projections onto P1 (`nu_h`, `beta_h`, `sigma_h`, `f_h`,
//! `y_d,h`); the mismatch is collected in the oscillation terms.

use alloc::vec::Vec;

use crate::control::SolutionBundle;
use crate::fem::bdm::CellBasis;
use crate::fem::layout::{cell_bases, local_coeffs};
use crate::fem::quadrature::{self, gauss_legendre, QuadratureRule};
use crate::fem::{FemError, ASSEMBLY_DEGREE, ERROR_DEGREE, FACE_POINTS};
use crate::math::{self, Point, Tensor, Vector};
use crate::mesh::Mesh;
use crate::problem::{ExactSolution, Fields, ProblemData};

/// Piecewise linear function stored by its corner values on each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Field {
    pub corners: Vec<[f64; 3]>,
}

impl P1Field {
    /// Elementwise L2 projection of `f`, integrated with `rule`.
    pub fn project(bases: &[CellBasis], rule: &QuadratureRule, f: &dyn Fn(Point) -> f64) -> Self {
        let corners = bases
            .iter()
            .map(|b| {
                let mut rhs = [0.0; 3];
                for (p, w) in rule.iter() {
                    let v = w * f(b.map.to_physical(p));
                    let l = barycentric(p);
                    for i in 0..3 {
                        rhs[i] += v * l[i];
                    }
                }
                // inverse of the reference P1 mass matrix (1/24)[[2,1,1],[1,2,1],[1,1,2]]
                let s = rhs[0] + rhs[1] + rhs[2];
                [0, 1, 2].map(|i| 6.0 * (4.0 * rhs[i] - s))
            })
            .collect();
        P1Field { corners }
    }

    pub fn value(&self, t: usize, p: Point) -> f64 {
        let l = barycentric(p);
        let c = &self.corners[t];
        c[0] * l[0] + c[1] * l[1] + c[2] * l[2]
    }

    pub fn gradient(&self, t: usize, basis: &CellBasis) -> Vector {
        let c = &self.corners[t];
        let g = [c[1] - c[0], c[2] - c[0]];
        let k = &basis.map.inverse;
        // J^{-T} times the reference gradient
        [k[0][0] * g[0] + k[1][0] * g[1], k[0][1] * g[0] + k[1][1] * g[1]]
    }
}

fn barycentric(p: Point) -> [f64; 3] {
    [1.0 - p[0] - p[1], p[0], p[1]]
}

/// P1 projections of all coefficients and data.
#[derive(Debug, Clone)]
pub struct DataProjections {
    pub nu: P1Field,
    pub beta: [P1Field; 2],
    pub sigma: P1Field,
    pub f: [P1Field; 2],
    pub yd: [P1Field; 2],
}

impl DataProjections {
    pub fn new(bases: &[CellBasis], fields: &dyn Fields) -> Result<Self, FemError> {
        let q = quadrature::triangle(ERROR_DEGREE)?;
        let pr = |f: &dyn Fn(Point) -> f64| P1Field::project(bases, &q, f);
        Ok(DataProjections {
            nu: pr(&|x| fields.viscosity(x)),
            beta: [pr(&|x| fields.convection(x)[0]), pr(&|x| fields.convection(x)[1])],
            sigma: pr(&|x| fields.reaction(x)),
            f: [pr(&|x| fields.source(x)[0]), pr(&|x| fields.source(x)[1])],
            yd: [pr(&|x| fields.desired(x)[0]), pr(&|x| fields.desired(x)[1])],
        })
    }

    fn vector(field: &[P1Field; 2], t: usize, p: Point) -> Vector {
        [field[0].value(t, p), field[1].value(t, p)]
    }

    pub fn beta_divergence(&self, t: usize, basis: &CellBasis) -> f64 {
        self.beta[0].gradient(t, basis)[0] + self.beta[1].gradient(t, basis)[1]
    }
}

/// Squared components of one element's state or adjoint indicator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualParts {
    pub residual: f64,
    pub edge: f64,
    pub jump_interior: f64,
    pub jump_boundary: f64,
}

impl ResidualParts {
    pub fn total(&self) -> f64 {
        self.residual + self.edge + self.jump_interior + self.jump_boundary
    }
}

/// Per-element indicators (all squared) with global roots.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    pub state: Vec<ResidualParts>,
    pub adjoint: Vec<ResidualParts>,
    pub control: Vec<f64>,
    pub osc_state: Vec<f64>,
    pub osc_adjoint: Vec<f64>,
}

fn root_sum(v: impl Iterator<Item = f64>) -> f64 {
    math::sqrt(v.sum())
}

impl IndicatorField {
    /// `Upsilon_K^2 = (eta_K^y)^2 + (eta_K^w)^2 + (eta_K^u)^2`.
    pub fn upsilon_sq(&self) -> Vec<f64> {
        (0..self.control.len())
            .map(|t| self.state[t].total() + self.adjoint[t].total() + self.control[t])
            .collect()
    }
    pub fn eta_y(&self) -> f64 {
        root_sum(self.state.iter().map(|s| s.total()))
    }
    pub fn eta_w(&self) -> f64 {
        root_sum(self.adjoint.iter().map(|s| s.total()))
    }
    pub fn eta_u(&self) -> f64 {
        root_sum(self.control.iter().copied())
    }
    pub fn theta_y(&self) -> f64 {
        root_sum(self.osc_state.iter().copied())
    }
    pub fn theta_w(&self) -> f64 {
        root_sum(self.osc_adjoint.iter().copied())
    }
    pub fn upsilon(&self) -> f64 {
        root_sum(self.upsilon_sq().into_iter())
    }
}

/// Cached per-mesh data shared by all estimator terms.
pub struct Estimator<'a> {
    pub mesh: &'a Mesh,
    pub data: &'a ProblemData,
    pub bases: Vec<CellBasis>,
    pub proj: DataProjections,
    pub kappa: f64,
    /// Maximum of `nu` over the volume quadrature points of each cell.
    pub nu_max: Vec<f64>,
    volume: QuadratureRule,
    fine: QuadratureRule,
    face_s: Vec<f64>,
    face_w: Vec<f64>,
}

/// Which of the two velocity equations an indicator refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Equation {
    State,
    Adjoint,
}

impl<'a> Estimator<'a> {
    pub fn new(mesh: &'a Mesh, data: &'a ProblemData) -> Result<Self, FemError> {
        let bases = cell_bases(mesh)?;
        let fields = &*data.fields;
        let proj = DataProjections::new(&bases, fields)?;
        let volume = quadrature::triangle(ASSEMBLY_DEGREE)?;
        let fine = quadrature::triangle(ERROR_DEGREE)?;
        let nu_max = bases
            .iter()
            .map(|b| fine.iter().map(|(p, _)| fields.viscosity(b.map.to_physical(p))).fold(f64::MIN, f64::max))
            .collect();
        let (face_s, face_w) = gauss_legendre(FACE_POINTS);
        Ok(Estimator { mesh, data, kappa: data.kappa(mesh), bases, proj, nu_max, volume, fine, face_s, face_w })
    }

    fn rho(&self, h: f64, nu: f64) -> f64 {
        let a = h / math::sqrt(nu);
        if self.kappa > 0.0 { a.min(1.0 / math::sqrt(self.kappa)) } else { a }
    }

    pub fn rho_k(&self, t: usize) -> f64 {
        self.rho(self.mesh.diameter(t), self.nu_max[t])
    }

    pub fn rho_e(&self, e: usize) -> f64 {
        let edge = &self.mesh.edges()[e];
        let nu = self
            .face_s
            .iter()
            .map(|&s| self.data.fields.viscosity(self.mesh.edge_point(e, s)))
            .fold(f64::MIN, f64::max);
        self.rho(edge.length, nu)
    }

    fn nu_h_at(&self, t: usize, p: Point) -> f64 {
        self.proj.nu.value(t, p).max(f64::MIN_POSITIVE)
    }

    fn interior_residual(&self, eq: Equation, b: &SolutionBundle, t: usize) -> f64 {
        let basis = &self.bases[t];
        let proj = &self.proj;
        let rho = self.rho_k(t);
        let (main, other) = match eq {
            Equation::State => (&b.y, &b.w),
            Equation::Adjoint => (&b.w, &b.y),
        };
        let c = local_coeffs(self.mesh, main, t);
        let grad = basis.field_gradient(&c);
        let grad_nu = proj.nu.gradient(t, basis);
        let div_beta = proj.beta_divergence(t, basis);
        // div(nu_h grad v_h) reduces to (grad v_h) grad nu_h for linear v_h
        let diff = math::tmul(&grad, grad_nu);
        let co = local_coeffs(self.mesh, other, t);
        let mut out = 0.0;
        for (p, w) in self.volume.iter() {
            let v = basis.field_value(&c, p);
            let beta = DataProjections::vector(&proj.beta, t, p);
            let adv = math::tmul(&grad, beta);
            let sigma = proj.sigma.value(t, p);
            let res = match eq {
                Equation::State => {
                    let f = DataProjections::vector(&proj.f, t, p);
                    let u = b.u[t];
                    [0, 1].map(|k| f[k] + u[k] + diff[k] - adv[k] - sigma * v[k])
                }
                Equation::Adjoint => {
                    let yd = DataProjections::vector(&proj.yd, t, p);
                    let y = basis.field_value(&co, p);
                    [0, 1].map(|k| y[k] - yd[k] + diff[k] + adv[k] - (sigma - div_beta) * v[k])
                }
            };
            out += w * basis.map.det * math::dot(res, res);
        }
        rho * rho * out
    }

    /// Adds edge-flux and trace-jump contributions of every edge to `parts`.
    fn face_terms(&self, eq: Equation, b: &SolutionBundle, parts: &mut [ResidualParts]) {
        let fields = &*self.data.fields;
        let gamma = self.data.gamma;
        let (v, q) = match eq {
            Equation::State => (&b.y, &b.p),
            Equation::Adjoint => (&b.w, &b.r),
        };
        // normal flux (q I - nu grad v) n for the state, (-q I - nu grad v) n for the adjoint
        let qsign = match eq {
            Equation::State => 1.0,
            Equation::Adjoint => -1.0,
        };
        for (e, edge) in self.mesh.edges().iter().enumerate() {
            let h = edge.length;
            let n = edge.normal;
            let sides: Vec<usize> = core::iter::once(edge.plus.0).chain(edge.minus.map(|m| m.0)).collect();
            let coeffs: Vec<[f64; 6]> = sides.iter().map(|&t| local_coeffs(self.mesh, v, t)).collect();
            let grads: Vec<Tensor> =
                sides.iter().zip(&coeffs).map(|(&t, c)| self.bases[t].field_gradient(c)).collect();
            let rho_e = if edge.is_boundary() { 0.0 } else { self.rho_e(e) };
            let mut flux = 0.0;
            let mut jump = 0.0;
            for (&s, &w) in self.face_s.iter().zip(&self.face_w) {
                let x = self.mesh.edge_point(e, s);
                let nu = fields.viscosity(x);
                let wq = w * h;
                let mut vals = [[0.0; 2]; 2];
                let mut nuh = [0.0; 2];
                for (k, &t) in sides.iter().enumerate() {
                    let p = self.bases[t].map.to_reference(x);
                    vals[k] = self.bases[t].field_value(&coeffs[k], p);
                    nuh[k] = self.nu_h_at(t, p);
                }
                if edge.is_boundary() {
                    let v0 = math::dot(vals[0], vals[0]);
                    jump += wq * (gamma / h * nuh[0] * v0 + self.kappa * h * v0 + h / nuh[0] * v0);
                    continue;
                }
                let side_flux = |k: usize| {
                    let t = sides[k];
                    let fl = math::sub(math::scale(qsign * q[t], n), math::scale(nu, math::tmul(&grads[k], n)));
                    math::scale(math::sqrt(rho_e) / math::sqrt(math::sqrt(nuh[k])), fl)
                };
                let fj = math::sub(side_flux(0), side_flux(1));
                flux += wq * math::dot(fj, fj);
                let j_pen = math::sub(math::scale(math::sqrt(nuh[0]), vals[0]), math::scale(math::sqrt(nuh[1]), vals[1]));
                let j_plain = math::sub(vals[0], vals[1]);
                let j_inv =
                    math::sub(math::scale(1.0 / math::sqrt(nuh[0]), vals[0]), math::scale(1.0 / math::sqrt(nuh[1]), vals[1]));
                jump += wq
                    * (gamma / h * math::dot(j_pen, j_pen)
                        + self.kappa * h * math::dot(j_plain, j_plain)
                        + h * math::dot(j_inv, j_inv));
            }
            if edge.is_boundary() {
                parts[sides[0]].jump_boundary += jump;
            } else {
                for &t in &sides {
                    parts[t].edge += 0.5 * flux;
                    parts[t].jump_interior += 0.5 * jump;
                }
            }
        }
    }

    fn residual_parts(&self, eq: Equation, b: &SolutionBundle) -> Vec<ResidualParts> {
        let mut parts: Vec<ResidualParts> = (0..self.mesh.num_triangles())
            .map(|t| ResidualParts { residual: self.interior_residual(eq, b, t), ..Default::default() })
            .collect();
        self.face_terms(eq, b, &mut parts);
        parts
    }

    pub fn state_indicators(&self, b: &SolutionBundle) -> Vec<ResidualParts> {
        self.residual_parts(Equation::State, b)
    }

    pub fn adjoint_indicators(&self, b: &SolutionBundle) -> Vec<ResidualParts> {
        self.residual_parts(Equation::Adjoint, b)
    }

    /// `h_K^2 ||w_h + lambda u_h||^2_K`.
    pub fn control_indicator(&self, b: &SolutionBundle) -> Vec<f64> {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let basis = &self.bases[t];
                let c = local_coeffs(self.mesh, &b.w, t);
                let hk = self.mesh.diameter(t);
                let mut s = 0.0;
                for (p, w) in self.volume.iter() {
                    let d = math::add(basis.field_value(&c, p), math::scale(self.data.lambda, b.u[t]));
                    s += w * basis.map.det * math::dot(d, d);
                }
                hk * hk * s
            })
            .collect()
    }

    /// Squared data oscillations `(Theta_K^y)^2` and `(Theta_K^w)^2`.
    pub fn oscillations(&self, b: &SolutionBundle) -> (Vec<f64>, Vec<f64>) {
        let fields = &*self.data.fields;
        let proj = &self.proj;
        let mut osc_y = Vec::with_capacity(self.mesh.num_triangles());
        let mut osc_w = Vec::with_capacity(self.mesh.num_triangles());
        for t in 0..self.mesh.num_triangles() {
            let basis = &self.bases[t];
            let rho2 = self.rho_k(t) * self.rho_k(t);
            let cy = local_coeffs(self.mesh, &b.y, t);
            let cw = local_coeffs(self.mesh, &b.w, t);
            let gy = basis.field_gradient(&cy);
            let gw = basis.field_gradient(&cw);
            let div_beta_h = proj.beta_divergence(t, basis);
            let (mut sy, mut sw) = (0.0, 0.0);
            for (p, w) in self.fine.iter() {
                let x = basis.map.to_physical(p);
                let wq = w * basis.map.det;
                let nu = fields.viscosity(x);
                let dnu = nu - proj.nu.value(t, p);
                let dbeta = math::sub(fields.convection(x), DataProjections::vector(&proj.beta, t, p));
                let sigma_h = proj.sigma.value(t, p);
                let dsigma = fields.reaction(x) - sigma_h;
                let df = math::sub(fields.source(x), DataProjections::vector(&proj.f, t, p));
                let dyd = math::sub(DataProjections::vector(&proj.yd, t, p), fields.desired(x));
                let y = basis.field_value(&cy, p);
                let wv = basis.field_value(&cw, p);
                let visc_y = dnu * dnu / nu * math::ddot(&gy, &gy);
                let visc_w = dnu * dnu / nu * math::ddot(&gw, &gw);
                let ay = math::tmul(&gy, dbeta);
                let aw = math::tmul(&gw, dbeta);
                let dreact = (fields.reaction(x) - fields.convection_divergence(x)) - (sigma_h - div_beta_h);
                sy += wq
                    * (rho2 * math::dot(df, df)
                        + visc_y
                        + rho2 * math::dot(ay, ay)
                        + rho2 * dsigma * dsigma * math::dot(y, y));
                sw += wq
                    * (rho2 * math::dot(dyd, dyd)
                        + visc_w
                        + rho2 * math::dot(aw, aw)
                        + rho2 * dreact * dreact * math::dot(wv, wv));
            }
            osc_y.push(sy);
            osc_w.push(sw);
        }
        (osc_y, osc_w)
    }

    pub fn indicators(&self, b: &SolutionBundle) -> IndicatorField {
        let (osc_state, osc_adjoint) = self.oscillations(b);
        IndicatorField {
            state: self.state_indicators(b),
            adjoint: self.adjoint_indicators(b),
            control: self.control_indicator(b),
            osc_state,
            osc_adjoint,
        }
    }

    // ---- error norms ----

    /// `||v - v_h||_0` where `v` defaults to zero.
    pub fn l2_velocity(&self, coeffs: &[f64], exact: Option<&dyn Fn(Point) -> Vector>) -> f64 {
        let mut s = 0.0;
        for (t, basis) in self.bases.iter().enumerate() {
            let c = local_coeffs(self.mesh, coeffs, t);
            for (p, w) in self.fine.iter() {
                let mut d = basis.field_value(&c, p);
                if let Some(f) = exact {
                    d = math::sub(f(basis.map.to_physical(p)), d);
                }
                s += w * basis.map.det * math::dot(d, d);
            }
        }
        math::sqrt(s)
    }

    /// Energy norm of `v - v_h`: broken `nu`-weighted gradient, penalty
    /// jumps of the discrete field, and `kappa ||.||^2`. A continuous `v`
    /// vanishing on the boundary contributes no jumps.
    pub fn energy(&self, coeffs: &[f64], exact: Option<(&dyn Fn(Point) -> Vector, &dyn Fn(Point) -> Tensor)>) -> f64 {
        let fields = &*self.data.fields;
        let mut s = 0.0;
        for (t, basis) in self.bases.iter().enumerate() {
            let c = local_coeffs(self.mesh, coeffs, t);
            let gh = basis.field_gradient(&c);
            for (p, w) in self.fine.iter() {
                let x = basis.map.to_physical(p);
                let mut v = basis.field_value(&c, p);
                let mut g = gh;
                if let Some((fv, fg)) = exact {
                    v = math::sub(fv(x), v);
                    let e = fg(x);
                    g = [[e[0][0] - g[0][0], e[0][1] - g[0][1]], [e[1][0] - g[1][0], e[1][1] - g[1][1]]];
                }
                s += w * basis.map.det * (fields.viscosity(x) * math::ddot(&g, &g) + self.kappa * math::dot(v, v));
            }
        }
        s += self.penalty_jumps(coeffs);
        math::sqrt(s)
    }

    fn penalty_jumps(&self, coeffs: &[f64]) -> f64 {
        let fields = &*self.data.fields;
        let gamma = self.data.gamma;
        let mut s = 0.0;
        for (e, edge) in self.mesh.edges().iter().enumerate() {
            for (&sq, &w) in self.face_s.iter().zip(&self.face_w) {
                let x = self.mesh.edge_point(e, sq);
                let j = self.trace_jump(coeffs, e, x);
                let factor = if edge.is_boundary() { 2.0 } else { 1.0 };
                s += w * edge.length * factor * gamma * fields.viscosity(x) / edge.length * math::dot(j, j);
            }
        }
        s
    }

    /// `v+ - v-` on interior edges, the trace on boundary edges.
    fn trace_jump(&self, coeffs: &[f64], e: usize, x: Point) -> Vector {
        let edge = &self.mesh.edges()[e];
        let eval = |t: usize| {
            let b = &self.bases[t];
            b.field_value(&local_coeffs(self.mesh, coeffs, t), b.map.to_reference(x))
        };
        let plus = eval(edge.plus.0);
        match edge.minus {
            Some((t, _)) => math::sub(plus, eval(t)),
            None => plus,
        }
    }

    /// `||nu^{-1/2} (q - q_h)||_0` for a piecewise constant `q_h`.
    pub fn pressure(&self, q: &[f64], exact: Option<&dyn Fn(Point) -> f64>) -> f64 {
        let fields = &*self.data.fields;
        let mut s = 0.0;
        for (t, basis) in self.bases.iter().enumerate() {
            for (p, w) in self.fine.iter() {
                let x = basis.map.to_physical(p);
                let d = exact.map_or(0.0, |f| f(x)) - q[t];
                s += w * basis.map.det * d * d / fields.viscosity(x);
            }
        }
        math::sqrt(s)
    }

    pub fn control_error(&self, u: &[Vector], exact: Option<&dyn Fn(Point) -> Vector>) -> f64 {
        let mut s = 0.0;
        for (t, basis) in self.bases.iter().enumerate() {
            for (p, w) in self.fine.iter() {
                let e = exact.map_or([0.0; 2], |f| f(basis.map.to_physical(p)));
                let d = math::sub(e, u[t]);
                s += w * basis.map.det * math::dot(d, d);
            }
        }
        math::sqrt(s)
    }

    /// Computable part of the convective semi-norm: edge jumps only.
    pub fn seminorm_jumps(&self, coeffs: &[f64]) -> f64 {
        let fields = &*self.data.fields;
        let mut s = 0.0;
        for (e, edge) in self.mesh.edges().iter().enumerate() {
            let h = edge.length;
            for (&sq, &w) in self.face_s.iter().zip(&self.face_w) {
                let x = self.mesh.edge_point(e, sq);
                let j = self.trace_jump(coeffs, e, x);
                let jj = math::dot(j, j);
                s += w * h * (fields.reaction(x) * h * jj + h / fields.viscosity(x) * jj);
            }
        }
        math::sqrt(s)
    }

    pub fn report(&self, b: &SolutionBundle, exact: &ExactSolution, upsilon: f64) -> ErrorReport {
        let l2_y = self.l2_velocity(&b.y, Some(&*exact.y));
        let energy_y = self.energy(&b.y, Some((&*exact.y, &*exact.grad_y)));
        let pressure_p = self.pressure(&b.p, Some(&*exact.p));
        let l2_w = self.l2_velocity(&b.w, Some(&*exact.w));
        let energy_w = self.energy(&b.w, Some((&*exact.w, &*exact.grad_w)));
        let pressure_r = self.pressure(&b.r, Some(&*exact.r));
        let l2_u = self.control_error(&b.u, Some(&*exact.u));
        let total = math::sqrt(
            energy_y * energy_y + pressure_p * pressure_p + energy_w * energy_w + pressure_r * pressure_r + l2_u * l2_u,
        );
        ErrorReport {
            l2_y,
            energy_y,
            pressure_p,
            l2_w,
            energy_w,
            pressure_r,
            l2_u,
            jumps_y: self.seminorm_jumps(&b.y),
            jumps_w: self.seminorm_jumps(&b.w),
            total,
            upsilon,
            efficiency: if total < EFFICIENCY_GUARD { None } else { Some(upsilon / total) },
        }
    }
}

pub const EFFICIENCY_GUARD: f64 = 1e-14;

/// Errors of one discrete solution against the closed-form one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub l2_y: f64,
    pub energy_y: f64,
    pub pressure_p: f64,
    pub l2_w: f64,
    pub energy_w: f64,
    pub pressure_r: f64,
    pub l2_u: f64,
    /// Edge-jump parts of the convective semi-norm of the errors.
    pub jumps_y: f64,
    pub jumps_w: f64,
    /// Root-sum-square of the energy, pressure and control errors.
    pub total: f64,
    pub upsilon: f64,
    pub efficiency: Option<f64>,
}

pub fn total_error_and_efficiency(
    mesh: &Mesh,
    data: &ProblemData,
    bundle: &SolutionBundle,
    exact: &ExactSolution,
) -> Result<(ErrorReport, IndicatorField), FemError> {
    let est = Estimator::new(mesh, data)?;
    let ind = est.indicators(bundle);
    Ok((est.report(bundle, exact, ind.upsilon()), ind))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Diffusion,
    Convection,
}

/// Per-element regime from `min(|beta.n| h_K / (c nu), 1)` maximised over
/// face quadrature points; `c` lumps the coercivity constants.
pub fn regime_classifier(mesh: &Mesh, fields: &dyn Fields, c: f64) -> Vec<Regime> {
    let (s, _) = gauss_legendre(FACE_POINTS);
    (0..mesh.num_triangles())
        .map(|t| {
            let hk = mesh.diameter(t);
            let mut r: f64 = 0.0;
            for e in mesh.triangle_edges(t) {
                let n = mesh.edges()[e].normal;
                for &sq in &s {
                    let x = mesh.edge_point(e, sq);
                    let ratio = math::abs(math::dot(fields.convection(x), n)) * hk / (c * fields.viscosity(x));
                    r = r.max(ratio.min(1.0));
                }
            }
            if r >= 1.0 { Regime::Convection } else { Regime::Diffusion }
        })
        .collect()
}
