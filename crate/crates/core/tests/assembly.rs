mod common;

use std::sync::Arc;

use common::oracle::{max_abs, max_abs_diff, Oracle};
use divdg_core::assembly::{assemble_a, assemble_b, assemble_load, assemble_mass, assemble_o, control_coupling, Assembler};
use divdg_core::fem::layout::interpolate;
use divdg_core::fem::DofLayout;
use divdg_core::mesh::{build_domain, build_unit_square, DomainKind};
use divdg_core::problem::{FnFields, ProblemData};
use divdg_core::sparse::{dot, norm2};
use divdg_core::Mesh;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 10.0;

fn linear_case(rng: &mut impl Rng) -> ([f64; 3], [f64; 2], [f64; 3]) {
    let nu = [1.5, rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
    let beta = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let sigma = [rng.gen_range(0.0..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    (nu, beta, sigma)
}

fn affine(c: [f64; 3]) -> impl Fn([f64; 2]) -> f64 + Copy + Send + Sync + 'static {
    move |x| c[0] + c[1] * x[0] + c[2] * x[1]
}

/// Compares the full-space assembled a_h, O_h, b_h with the oracle.
fn compare(mesh: &Mesh, rng: &mut impl Rng) -> f64 {
    let (nu, beta, sigma) = linear_case(rng);
    let fields = FnFields::constant(1.0, beta, 0.0).with_viscosity(affine(nu)).with_reaction(affine(sigma));
    let asm = Assembler::new(mesh).unwrap();
    let oracle = Oracle::new(mesh);
    let a = asm.diffusion(&fields, GAMMA).to_dense();
    let ao = oracle.diffusion(mesh, &affine(nu), GAMMA);
    let o = asm.convection(&fields).to_dense();
    let oo = oracle.convection(mesh, beta, &affine(sigma));
    let b = asm.divergence().to_dense();
    let bo: Vec<Vec<f64>> = (0..mesh.num_triangles()).map(|t| oracle.divergence_cell(t)).collect();
    [(a, ao), (o, oo), (b, bo)]
        .iter()
        .map(|(x, y)| max_abs_diff(x, y) / max_abs(y).max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn local_matrices_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        worst = worst.max(compare(&common::single_cell(&mut rng), &mut rng));
        worst = worst.max(compare(&common::two_cells(&mut rng), &mut rng));
    }
    assert!(worst <= 1e-12, "worst relative mismatch {worst:e}");
}

#[test]
fn oracle_on_reference_triangle() {
    // nu = 1, sigma = 0, beta = 0 on the reference cell
    let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
    let fields = FnFields::constant(1.0, [0.0, 0.0], 0.0);
    let a = Assembler::new(&mesh).unwrap().diffusion(&fields, GAMMA).to_dense();
    let ao = Oracle::new(&mesh).diffusion(&mesh, &|_| 1.0, GAMMA);
    assert!(max_abs_diff(&a, &ao) <= 1e-12 * max_abs(&ao));
}

fn data(fields: FnFields) -> ProblemData {
    ProblemData::new(Arc::new(fields), [-1.0; 2], [1.0; 2], 1.0, GAMMA).unwrap()
}

fn example_fields() -> FnFields {
    FnFields::constant(1.0, [0.0, 0.0], 1.0)
        .with_viscosity(|x| 1.0 + 0.01 * x[0] * x[0])
        .with_convection(|x| [x[0] * x[0], x[1] * x[1]], |x| 2.0 * x[0] + 2.0 * x[1])
}

#[test]
fn diffusion_is_exactly_symmetric() {
    let m = build_unit_square(4).unwrap();
    let l = DofLayout::new(&m);
    let a = assemble_a(&m, &l, &data(example_fields())).unwrap();
    assert_eq!(a.max_abs_diff(&a.transpose()), 0.0);
}

#[test]
fn divergence_of_interpolants() {
    let m = build_domain(DomainKind::UnitSquare, 5).unwrap();
    let l = DofLayout::new(&m);
    let b = assemble_b(&m, &l).unwrap();
    let full = Assembler::new(&m).unwrap().divergence();
    let radial = full.mul_vec(&interpolate(&m, |x| [x[0], x[1]]));
    for t in 0..m.num_triangles() {
        assert!((radial[t] + 2.0 * m.area(t)).abs() < 1e-13);
    }
    // interpolant of curl psi with psi = sin(x) cos(2y) is solenoidal
    let curl = interpolate(&m, |x| [-2.0 * x[0].sin() * (2.0 * x[1]).sin(), -x[0].cos() * (2.0 * x[1]).cos()]);
    assert!(full.mul_vec(&curl).iter().all(|v| v.abs() < 1e-12));
    assert!(b.mul_vec(&vec![0.0; l.num_free_velocity()]).iter().all(|v| *v == 0.0));
}

#[test]
fn loads_and_coupling() {
    let m = build_domain(DomainKind::LShape, 3).unwrap();
    let l = DofLayout::new(&m);
    let asm = Assembler::new(&m).unwrap();
    let full = asm.load(&|_| [0.7, -0.2]);
    let d = interpolate(&m, |_| [1.5, 2.0]);
    let area = DomainKind::LShape.area();
    assert!((dot(&full, &d) - (0.7 * 1.5 - 0.2 * 2.0) * area).abs() < 1e-12);
    assert!(asm.load(&|_| [0.0, 0.0]).iter().all(|v| *v == 0.0));
    let g = assemble_load(&m, &l, &|_| [1.0, 1.0]).unwrap();
    let mu = control_coupling(&m, &l).unwrap();
    let ones = mu.mul_vec(&vec![1.0; 2 * m.num_triangles()]);
    assert!(g.iter().zip(&ones).all(|(a, b)| (a - b).abs() < 1e-14));
    // polynomial load against the oracle's quadrature
    let oracle = Oracle::new(&m);
    let poly = |x: [f64; 2]| [x[0] * x[0] - x[1], 2.0 * x[0] * x[1] + 1.0];
    let full = asm.load(&poly);
    let mut want = vec![0.0; full.len()];
    for c in &oracle.cells {
        for (x, w) in c.points() {
            for (k, dof) in c.dofs.iter().enumerate() {
                let v = c.basis[k].at(x);
                let g = poly(x);
                want[*dof] += w * (g[0] * v[0] + g[1] * v[1]);
            }
        }
    }
    let diff = full.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff:e}");
}

#[test]
fn convection_special_cases() {
    let m = build_unit_square(3).unwrap();
    let l = DofLayout::new(&m);
    let zero = assemble_o(&m, &l, &data(FnFields::constant(1.0, [0.0, 0.0], 0.0))).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    let o = assemble_o(&m, &l, &data(FnFields::constant(1.0, [0.0, 0.0], 1.0))).unwrap();
    let mass = assemble_mass(&m, &l).unwrap();
    assert!(o.max_abs_diff(&mass) < 1e-15);
}

/// Refined meshes of every domain, with some random bisections.
fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    (0usize..4, 2usize..4, any::<u64>()).prop_map(|(k, n, seed)| {
        let kind = [DomainKind::UnitSquare, DomainKind::UnitTriangle, DomainKind::LShape, DomainKind::TShape][k];
        let mut m = build_domain(kind, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let marked: Vec<usize> = (0..m.num_triangles()).filter(|_| rng.gen_bool(0.3)).collect();
        if !marked.is_empty() {
            m = m.bisect(&marked).unwrap();
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normal_traces_are_continuous(m in mesh_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..2 * m.num_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bases = divdg_core::fem::layout::cell_bases(&m).unwrap();
        for (e, edge) in m.edges().iter().enumerate() {
            let Some((tm, _)) = edge.minus else { continue };
            for s in [0.1, 0.5, 0.8] {
                let x = m.edge_point(e, s);
                let side = |t: usize| {
                    let b = &bases[t];
                    b.field_value(&divdg_core::fem::layout::local_coeffs(&m, &coeffs, t), b.map.to_reference(x))
                };
                let (p, q) = (side(edge.plus.0), side(tm));
                let jump = (p[0] - q[0]) * edge.normal[0] + (p[1] - q[1]) * edge.normal[1];
                prop_assert!(jump.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_is_cellwise_constant_flux(m in mesh_strategy(), seed in any::<u64>()) {
        // div v on K equals the net edge flux over |K|
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..2 * m.num_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let div = Assembler::new(&m).unwrap().divergence().mul_vec(&coeffs);
        for t in 0..m.num_triangles() {
            let signs = m.triangle_signs(t);
            let flux: f64 = m.triangle_edges(t).iter().zip(signs).map(|(e, s)| s * coeffs[2 * e]).sum();
            prop_assert!((-div[t] - flux).abs() < 1e-12 * (1.0 + flux.abs()));
        }
    }

    #[test]
    fn diffusion_is_coercive(seed in any::<u64>()) {
        let m = build_unit_square(4).unwrap();
        let l = DofLayout::new(&m);
        let a = assemble_a(&m, &l, &data(example_fields())).unwrap();
        let mass = assemble_mass(&m, &l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..l.num_free_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert!(a.quadratic_form(&v) > 0.0);
        prop_assert!(a.quadratic_form(&v) > mass.quadratic_form(&v));
    }

    #[test]
    fn upwinding_is_nonnegative(seed in any::<u64>(), k in 0usize..3) {
        let fields = [
            FnFields::constant(1.0, [1.0, 0.0], 0.0),
            FnFields::constant(1.0, [-0.3, 2.0], 0.5),
            FnFields::constant(1.0, [0.0, 0.0], 0.0).with_convection(|x| [x[1] - 0.5, 0.5 - x[0]], |_| 0.0),
        ];
        let m = build_unit_square(4).unwrap();
        let l = DofLayout::new(&m);
        let o = assemble_o(&m, &l, &data(fields.into_iter().nth(k).unwrap())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..l.num_free_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert!(o.quadratic_form(&v) >= -1e-12 * norm2(&v).powi(2));
    }
}
