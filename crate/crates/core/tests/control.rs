use std::sync::Arc;

use divdg_core::catalog::{self, accuracy, catalog};
use divdg_core::control::{project_control, pdas_solve, ActiveSets, KktContext, Label, SolutionBundle};
use divdg_core::fem::layout::{cell_bases, cell_divergences};
use divdg_core::fem::DofLayout;
use divdg_core::mesh::build_domain;
use divdg_core::problem::DEFAULT_PENALTY;
use divdg_core::{Mesh, ProblemData};

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

fn zero_mean(mesh: &Mesh, q: &[f64]) -> f64 {
    (0..mesh.num_triangles()).map(|t| mesh.area(t) * q[t]).sum::<f64>()
}

fn check_invariants(mesh: &Mesh, b: &SolutionBundle, bounds: Option<&ProblemData>) {
    let bases = cell_bases(mesh).unwrap();
    let norm = b.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for d in cell_divergences(mesh, &bases, &b.y) {
        assert!(d.abs() <= 1e-10 * (1.0 + norm), "div y_h = {d}");
    }
    let norm = b.w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for d in cell_divergences(mesh, &bases, &b.w) {
        assert!(d.abs() <= 1e-10 * (1.0 + norm), "div w_h = {d}");
    }
    assert!(zero_mean(mesh, &b.p).abs() < 1e-10);
    assert!(zero_mean(mesh, &b.r).abs() < 1e-10);
    // inactive pairs of intermediate iterates may leave the box
    let Some(data) = bounds else { return };
    for u in &b.u {
        for c in 0..2 {
            assert!(data.lower[c] <= u[c] && u[c] <= data.upper[c]);
        }
    }
}

#[test]
fn pdas_on_every_case() {
    for case in catalog() {
        let mesh = case.initial_mesh().unwrap();
        let layout = DofLayout::new(&mesh);
        let data = case.problem(DEFAULT_PENALTY).unwrap();
        let ctx = KktContext::new(&mesh, &layout, &data).unwrap();
        let out = ctx.pdas(30).unwrap();
        assert!(out.iterations <= 30, "{}", case.name);
        let b = &out.bundle;
        let cand: Vec<_> = ctx.cell_means(&b.w).iter().map(|m| [-m[0] / data.lambda, -m[1] / data.lambda]).collect();
        for (t, c) in cand.iter().enumerate() {
            assert_eq!(b.u[t], project_control(*c, data.lower, data.upper), "{} cell {t}", case.name);
        }
        assert_eq!(ActiveSets::from_candidate(&cand, &data), out.active);
        assert!(out.residual <= 1e-9, "{} residual {}", case.name, out.residual);
        check_invariants(&mesh, b, Some(&data));
    }
}

#[test]
fn every_iterate_keeps_the_invariants() {
    // replays the active-set loop by hand on each iterate
    for case in [accuracy(), catalog::boundary_layer()] {
        let mesh = case.initial_mesh().unwrap();
        let layout = DofLayout::new(&mesh);
        let data = case.problem(DEFAULT_PENALTY).unwrap();
        let ctx = KktContext::new(&mesh, &layout, &data).unwrap();
        let mut active = ActiveSets::all_inactive(mesh.num_triangles());
        for _ in 0..30 {
            let b = ctx.solve_active(&active).unwrap();
            check_invariants(&mesh, &b, None);
            let cand: Vec<_> = ctx.cell_means(&b.w).iter().map(|m| [-m[0] / data.lambda, -m[1] / data.lambda]).collect();
            let next = ActiveSets::from_candidate(&cand, &data);
            if next == active {
                break;
            }
            active = next;
        }
    }
}

#[test]
fn objective_is_monotone_after_first_iterate() {
    for case in catalog() {
        let mesh = case.initial_mesh().unwrap();
        let data = case.problem(DEFAULT_PENALTY).unwrap();
        let out = pdas_solve(&mesh, &DofLayout::new(&mesh), &data, 30).unwrap();
        for w in out.objective.windows(2).skip(1) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{}: {:?}", case.name, out.objective);
        }
    }
}

#[test]
fn unbounded_box_matches_unconstrained_solve() {
    for case in catalog() {
        let mesh = case.initial_mesh().unwrap();
        let layout = DofLayout::new(&mesh);
        let base = case.problem(DEFAULT_PENALTY).unwrap();
        let data = ProblemData::new(Arc::clone(&base.fields), [-1e12; 2], [1e12; 2], base.lambda, base.gamma).unwrap();
        let ctx = KktContext::new(&mesh, &layout, &data).unwrap();
        let out = ctx.pdas(30).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.active.count(Label::Inactive), 2 * mesh.num_triangles());
        let free = ctx.solve_unconstrained().unwrap();
        let b = &out.bundle;
        for (name, x, y) in [
            ("y", &b.y, &free.y),
            ("p", &b.p, &free.p),
            ("w", &b.w, &free.w),
            ("r", &b.r, &free.r),
            ("u", &b.u_flat(), &free.u_flat()),
        ] {
            let d = rel_diff(x, y);
            assert!(d <= 1e-9, "{} {name}: {d}", case.name);
        }
        assert!(ctx.residual(&free) <= 1e-9);
    }
}

#[test]
fn accuracy_case_settles_quickly() {
    // the manufactured control is clamped on part of the square, so the
    // fixed point has both active and inactive pairs
    let case = accuracy();
    let data = case.problem(DEFAULT_PENALTY).unwrap();
    for n in [4, 8] {
        let mesh = build_domain(case.domain, n).unwrap();
        let out = pdas_solve(&mesh, &DofLayout::new(&mesh), &data, 50).unwrap();
        assert!(out.iterations <= 3, "n={n}: {}", out.iterations);
        assert!(out.active.count(Label::Inactive) > 0);
        assert!(out.active.count(Label::Lower) + out.active.count(Label::Upper) > 0);
    }
}
