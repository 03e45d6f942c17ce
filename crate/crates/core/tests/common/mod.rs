#![allow(dead_code)]

pub mod oracle;

use divdg_core::Mesh;
use rand::Rng;

/// Random triangle with all angles above 15 degrees, scaled to diameter
/// between 0.05 and 2.
pub fn random_triangle(rng: &mut impl Rng) -> [[f64; 2]; 3] {
    loop {
        let scale = 0.05 + 1.95 * rng.gen::<f64>();
        let shift = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let p: [[f64; 2]; 3] =
            core::array::from_fn(|_| [shift[0] + scale * rng.gen_range(-0.5..0.5), shift[1] + scale * rng.gen_range(-0.5..0.5)]);
        if min_angle(&p) > 15f64.to_radians() {
            return p;
        }
    }
}

pub fn min_angle(p: &[[f64; 2]; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let a = p[i];
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
            cos.clamp(-1.0, 1.0).acos()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn single_cell(rng: &mut impl Rng) -> Mesh {
    Mesh::new(random_triangle(rng).to_vec(), vec![[0, 1, 2]]).unwrap()
}

/// Two random triangles sharing one edge.
pub fn two_cells(rng: &mut impl Rng) -> Mesh {
    loop {
        let [a, b, c] = random_triangle(rng);
        // reflect b across the edge ac and jitter it
        let d = [c[0] - a[0], c[1] - a[1]];
        let t = ((b[0] - a[0]) * d[0] + (b[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1]);
        let foot = [a[0] + t * d[0], a[1] + t * d[1]];
        let j = 0.3 * (d[0] * d[0] + d[1] * d[1]).sqrt();
        let q = [2.0 * foot[0] - b[0] + j * rng.gen_range(-0.5..0.5), 2.0 * foot[1] - b[1] + j * rng.gen_range(-0.5..0.5)];
        if min_angle(&[a, c, q]) > 15f64.to_radians() {
            let side = |p: [f64; 2]| d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0]);
            if side(b) * side(q) < 0.0 {
                return Mesh::new(vec![a, b, c, q], vec![[0, 1, 2], [0, 2, 3]]).unwrap();
            }
        }
    }
}
