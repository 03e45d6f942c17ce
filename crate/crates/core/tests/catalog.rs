use std::sync::Arc;

use divdg_core::catalog::{accuracy, boundary_layer, by_name, catalog, CaseData, CatalogError, JetFn, Manufactured, CASE_NAMES};
use divdg_core::jet::Jet;
use divdg_core::math::{Point, Vector};
use divdg_core::Fields;

/// Keeps the value of `f` and drops every derivative.
fn flatten(f: &JetFn) -> JetFn {
    let f = Arc::clone(f);
    Arc::new(move |x, y| Jet::constant(f(x, y).value()))
}

/// Zeroes the second-order Taylor coefficients of `f`.
fn drop_second_order(f: &JetFn) -> JetFn {
    let f = Arc::clone(f);
    Arc::new(move |x, y| {
        let mut j = f(x, y);
        j.c[3..6].fill(0.0);
        j
    })
}

fn manufactured(case: &divdg_core::catalog::BenchmarkCase) -> Manufactured {
    match &case.data {
        CaseData::Manufactured(m) => m.clone(),
        CaseData::Given { .. } => panic!("{} has no closed form", case.name),
    }
}

#[test]
fn gate_passes_for_the_catalog() {
    for case in catalog() {
        case.validate().unwrap_or_else(|e| panic!("{e}"));
    }
    assert_eq!(catalog().iter().map(|c| c.name).collect::<Vec<_>>(), CASE_NAMES);
    assert!(by_name("accuracy").unwrap().has_exact());
    assert!(!by_name("l-shape").unwrap().has_exact());
    assert!(matches!(by_name("cube"), Err(CatalogError::UnknownCase(_))));
}

#[test]
fn gate_catches_broken_derivatives() {
    for base in [accuracy(), boundary_layer()] {
        let m = manufactured(&base);
        let mut case = base.clone();
        case.data = CaseData::Manufactured(Manufactured { psi_y: drop_second_order(&m.psi_y), ..m.clone() });
        match case.validate() {
            Err(CatalogError::Derivative { term, .. }) => assert_eq!(term, "grad y"),
            other => panic!("{}: {other:?}", base.name),
        }
        let mut case = base.clone();
        case.data = CaseData::Manufactured(Manufactured { r: flatten(&m.r), ..m.clone() });
        match case.validate() {
            Err(CatalogError::Derivative { term, .. }) => assert_eq!(term, "grad r"),
            other => panic!("{}: {other:?}", base.name),
        }
        let mut case = base.clone();
        case.coefficients.beta[1] = flatten(&base.coefficients.beta[1]);
        assert!(matches!(case.validate(), Err(CatalogError::Derivative { term: "div beta", .. })), "{}", base.name);
    }
}

fn fd<T: Copy>(f: &dyn Fn(Point) -> T, x: Point, k: usize, h: f64, sub: impl Fn(T, T) -> T) -> T {
    let (mut a, mut b) = (x, x);
    a[k] += h;
    b[k] -= h;
    sub(f(a), f(b))
}

/// Strong residuals rebuilt from the exported callbacks only.
#[test]
fn exported_callbacks_solve_the_strong_equations() {
    let h = 1e-5;
    for case in [accuracy(), boundary_layer()] {
        let ex = case.exact().unwrap();
        let fields = case.fields();
        for x in case.sample_points(50, 7) {
            let nu_grad = |g: &dyn Fn(Point) -> [[f64; 2]; 2]| {
                [0, 1].map(|a| {
                    (0..2)
                        .map(|k| {
                            let flux = |z: Point| fields.viscosity(z) * g(z)[a][k];
                            fd(&flux, x, k, h, |p, q| p - q) / (2.0 * h)
                        })
                        .sum::<f64>()
                })
            };
            let grad = |f: &dyn Fn(Point) -> f64| [0, 1].map(|k| fd(f, x, k, h, |p, q| p - q) / (2.0 * h));
            let vy = nu_grad(&*ex.grad_y);
            let vw = nu_grad(&*ex.grad_w);
            let gp = grad(&*ex.p);
            let gr = grad(&*ex.r);
            let beta = fields.convection(x);
            let adv = |g: [[f64; 2]; 2]| -> Vector { [0, 1].map(|a| g[a][0] * beta[0] + g[a][1] * beta[1]) };
            let (y, w, u) = ((ex.y)(x), (ex.w)(x), (ex.u)(x));
            let (ay, aw) = (adv((ex.grad_y)(x)), adv((ex.grad_w)(x)));
            let (f, yd) = (fields.source(x), fields.desired(x));
            let sigma = fields.reaction(x);
            let div_beta = fields.convection_divergence(x);
            for k in 0..2 {
                let state = [-vy[k], ay[k], sigma * y[k], gp[k], -f[k], -u[k]];
                let adjoint = [-vw[k], -aw[k], (sigma - div_beta) * w[k], -gr[k], -y[k], yd[k]];
                for (name, terms) in [("state", state), ("adjoint", adjoint)] {
                    let size: f64 = terms.iter().map(|t| t.abs()).sum();
                    let res: f64 = terms.iter().sum();
                    assert!(res.abs() <= 1e-6 * size.max(1e-12), "{} {name} at {x:?}: {res:e} of {size:e}", case.name);
                }
            }
        }
    }
}
