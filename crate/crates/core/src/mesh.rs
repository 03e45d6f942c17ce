//! Conforming triangulations with edge topology and newest-vertex bisection.
//!
//! Triangles are stored counterclockwise with local vertex 0 as the newest
//! vertex: the refinement edge is always the local edge 0, i.e. `(v1, v2)`.
//! Local edge `i` runs from `v[(i + 1) % 3]` to `v[(i + 2) % 3]`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::math::{self, Point, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("unknown domain kind `{0}`")]
    UnknownDomain(String),
    #[error("triangle {0} has non-positive area")]
    Degenerate(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifold(usize, usize),
    #[error("triangle index {0} out of range")]
    BadIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    UnitSquare,
    UnitTriangle,
    LShape,
    TShape,
}

impl DomainKind {
    pub fn area(self) -> f64 {
        match self {
            DomainKind::UnitSquare => 1.0,
            DomainKind::UnitTriangle => 0.5,
            DomainKind::LShape => 3.0,
            DomainKind::TShape => 5.0,
        }
    }

    pub fn perimeter(self) -> f64 {
        match self {
            DomainKind::UnitSquare => 4.0,
            DomainKind::UnitTriangle => 2.0 + math::sqrt(2.0),
            DomainKind::LShape => 8.0,
            DomainKind::TShape => 12.0,
        }
    }

    /// Whether `x` lies in the open polygon.
    pub fn contains(self, x: Point) -> bool {
        let [a, b] = x;
        match self {
            DomainKind::UnitSquare => a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0,
            DomainKind::UnitTriangle => a > 0.0 && b > 0.0 && a + b < 1.0,
            DomainKind::LShape => a > -1.0 && a < 1.0 && b > -1.0 && b < 1.0 && !(a >= 0.0 && b <= 0.0),
            DomainKind::TShape => {
                (a > -1.5 && a < 1.5 && b > 0.0 && b < 1.0) || (a > -0.5 && a < 0.5 && b > -2.0 && b <= 0.0)
            }
        }
    }

    /// `[min, max]` corners of the bounding box.
    pub fn bounding_box(self) -> [Point; 2] {
        match self {
            DomainKind::UnitSquare | DomainKind::UnitTriangle => [[0.0, 0.0], [1.0, 1.0]],
            DomainKind::LShape => [[-1.0, -1.0], [1.0, 1.0]],
            DomainKind::TShape => [[-1.5, -2.0], [1.5, 1.0]],
        }
    }

    /// Corners where the interior angle exceeds pi.
    pub fn reentrant_corners(self) -> &'static [Point] {
        match self {
            DomainKind::LShape => &[[0.0, 0.0]],
            DomainKind::TShape => &[[-0.5, 0.0], [0.5, 0.0]],
            _ => &[],
        }
    }
}

impl FromStr for DomainKind {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit-square" => Ok(DomainKind::UnitSquare),
            "unit-triangle" => Ok(DomainKind::UnitTriangle),
            "l-shape" => Ok(DomainKind::LShape),
            "t-shape" => Ok(DomainKind::TShape),
            other => Err(MeshError::UnknownDomain(String::from(other))),
        }
    }
}

/// One mesh edge with its globally fixed orientation.
///
/// The unit normal is the clockwise rotation of `vertices[1] - vertices[0]`;
/// it points out of the `plus` triangle. `minus` is `None` on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub normal: Vector,
    pub length: f64,
    pub plus: (usize, usize),
    pub minus: Option<(usize, usize)>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    tri_signs: Vec<[f64; 3]>,
    parents: Vec<usize>,
}

impl Mesh {
    /// Builds an initial mesh. Each triangle is reoriented counterclockwise and
    /// rotated so that its longest edge becomes the refinement edge.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut tris = triangles;
        for (t, tri) in tris.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::BadIndex(t));
            }
            if signed_area(&vertices, *tri) < 0.0 {
                tri.swap(1, 2);
            }
            let mut best = 0;
            let mut best_len = -1.0;
            for i in 0..3 {
                let a = vertices[tri[(i + 1) % 3]];
                let b = vertices[tri[(i + 2) % 3]];
                let len = math::norm(math::sub(b, a));
                if len > best_len * (1.0 + 1e-12) {
                    best = i;
                    best_len = len;
                }
            }
            tri.rotate_left(best);
        }
        let parents = (0..tris.len()).collect();
        Self::from_parts(vertices, tris, parents)
    }

    /// Builds the topology without touching vertex order.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        parents: Vec<usize>,
    ) -> Result<Self, MeshError> {
        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut tri_signs = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::BadIndex(t));
            }
            if signed_area(&vertices, *tri) <= 0.0 {
                return Err(MeshError::Degenerate(t));
            }
            let mut te = [0; 3];
            let mut ts = [0.0; 3];
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.minus.is_some() || edge.vertices == [a, b] {
                            return Err(MeshError::NonManifold(key.0, key.1));
                        }
                        edge.minus = Some((t, i));
                        te[i] = e;
                        ts[i] = -1.0;
                    }
                    None => {
                        let d = math::sub(vertices[b], vertices[a]);
                        let length = math::norm(d);
                        let e = edges.len();
                        edges.push(Edge {
                            vertices: [a, b],
                            normal: [d[1] / length, -d[0] / length],
                            length,
                            plus: (t, i),
                            minus: None,
                        });
                        lookup.insert(key, e);
                        te[i] = e;
                        ts[i] = 1.0;
                    }
                }
            }
            tri_edges.push(te);
            tri_signs.push(ts);
        }
        Ok(Mesh { vertices, triangles, edges, tri_edges, tri_signs, parents })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    /// Global edges of triangle `t`, local edge `i` opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }
    /// +1 where the triangle is the plus side of its local edge, -1 otherwise.
    pub fn triangle_signs(&self, t: usize) -> [f64; 3] {
        self.tri_signs[t]
    }
    /// Index of the triangle in the previous mesh this one descends from.
    pub fn parent(&self, t: usize) -> usize {
        self.parents[t]
    }
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Diameter of the triangle (its longest edge).
    pub fn diameter(&self, t: usize) -> f64 {
        self.tri_edges[t]
            .iter()
            .map(|&e| self.edges[e].length)
            .fold(0.0, f64::max)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_point(&self, e: usize, s: f64) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.num_edges() - self.num_boundary_edges()
    }

    pub fn boundary_length(&self) -> f64 {
        self.edges.iter().filter(|e| e.is_boundary()).map(|e| e.length).sum()
    }

    /// `V - E + T`, equal to one for a simply connected conforming mesh.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    /// Smallest interior angle (radians) over all triangles.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let p = self.corners(t);
            for i in 0..3 {
                let u = math::sub(p[(i + 1) % 3], p[i]);
                let v = math::sub(p[(i + 2) % 3], p[i]);
                let ang = libm::atan2(math::abs(math::cross(u, v)), math::dot(u, v));
                min = min.min(ang);
            }
        }
        min
    }

    /// Newest-vertex bisection of all `marked` triangles plus the closure
    /// needed to keep the mesh conforming.
    pub fn bisect(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        let mut edge_marked = vec![false; self.num_edges()];
        let mut work: Vec<usize> = Vec::new();
        for &t in marked {
            if t >= self.num_triangles() {
                return Err(MeshError::BadIndex(t));
            }
            let e = self.tri_edges[t][0];
            if !edge_marked[e] {
                edge_marked[e] = true;
                work.push(e);
            }
        }
        if work.is_empty() {
            let mut same = self.clone();
            same.parents = (0..self.num_triangles()).collect();
            return Ok(same);
        }
        while let Some(e) = work.pop() {
            let edge = &self.edges[e];
            let sides = [Some(edge.plus), edge.minus];
            for (t, _) in sides.into_iter().flatten() {
                let r = self.tri_edges[t][0];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    work.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![usize::MAX; self.num_edges()];
        for (e, &m) in edge_marked.iter().enumerate() {
            if m {
                let [a, b] = self.edges[e].vertices;
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                midpoint[e] = vertices.len();
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }

        let mut triangles = Vec::with_capacity(self.num_triangles() + 2 * marked.len());
        let mut parents = Vec::with_capacity(triangles.capacity());
        for (t, &[v0, v1, v2]) in self.triangles.iter().enumerate() {
            let [e0, e1, e2] = self.tri_edges[t];
            if !edge_marked[e0] {
                triangles.push([v0, v1, v2]);
                parents.push(t);
                continue;
            }
            let m = midpoint[e0];
            if edge_marked[e2] {
                let m2 = midpoint[e2];
                triangles.push([m2, m, v0]);
                triangles.push([m2, v1, m]);
                parents.extend([t, t]);
            } else {
                triangles.push([m, v0, v1]);
                parents.push(t);
            }
            if edge_marked[e1] {
                let m1 = midpoint[e1];
                triangles.push([m1, m, v2]);
                triangles.push([m1, v0, m]);
                parents.extend([t, t]);
            } else {
                triangles.push([m, v2, v0]);
                parents.push(t);
            }
        }
        Mesh::from_parts(vertices, triangles, parents)
    }
}

fn signed_area(vertices: &[Point], tri: [usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    0.5 * math::cross(math::sub(b, a), math::sub(c, a))
}

/// `(0,1)^2` split into `n x n` squares, each cut along its rising diagonal.
pub fn build_unit_square(n: usize) -> Result<Mesh, MeshError> {
    build_domain(DomainKind::UnitSquare, n)
}

pub fn build_domain(kind: DomainKind, n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    match kind {
        DomainKind::UnitSquare => square_blocks([0.0, 0.0], &[(0, 0)], n),
        DomainKind::LShape => square_blocks([-1.0, -1.0], &[(0, 0), (0, 1), (1, 1)], n),
        DomainKind::TShape => {
            square_blocks([-1.5, -2.0], &[(1, 0), (1, 1), (0, 2), (1, 2), (2, 2)], n)
        }
        DomainKind::UnitTriangle => unit_triangle(n),
    }
}

pub fn build_domain_named(kind: &str, n: usize) -> Result<Mesh, MeshError> {
    build_domain(kind.parse()?, n)
}

/// Union of unit squares with lower-left corners `origin + (i, j)`, each
/// subdivided into `n x n` cells.
fn square_blocks(origin: Point, blocks: &[(usize, usize)], n: usize) -> Result<Mesh, MeshError> {
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let h = 1.0 / n as f64;
    let mut vertex = |i: usize, j: usize, vertices: &mut Vec<Point>| -> usize {
        *index.entry((i, j)).or_insert_with(|| {
            vertices.push([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
            vertices.len() - 1
        })
    };
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for &(bi, bj) in blocks {
        for cj in 0..n {
            for ci in 0..n {
                cells.push((bi * n + ci, bj * n + cj));
            }
        }
    }
    cells.sort_by_key(|&(i, j)| (j, i));
    for (i, j) in cells {
        let a = vertex(i, j, &mut vertices);
        let b = vertex(i + 1, j, &mut vertices);
        let c = vertex(i + 1, j + 1, &mut vertices);
        let d = vertex(i, j + 1, &mut vertices);
        triangles.push([a, b, c]);
        triangles.push([a, c, d]);
    }
    Mesh::new(vertices, triangles)
}

fn unit_triangle(n: usize) -> Result<Mesh, MeshError> {
    let h = 1.0 / n as f64;
    let mut vertices = Vec::new();
    let mut id = vec![vec![0usize; n + 1]; n + 1];
    for j in 0..=n {
        for i in 0..=(n - j) {
            id[i][j] = vertices.len();
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..(n - j) {
            triangles.push([id[i][j], id[i + 1][j], id[i][j + 1]]);
            if i + j + 1 < n {
                triangles.push([id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]]);
            }
        }
    }
    Mesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_topology(mesh: &Mesh) {
        for (e, edge) in mesh.edges().iter().enumerate() {
            let (t, i) = edge.plus;
            assert_eq!(mesh.triangle_edges(t)[i], e);
            assert_eq!(mesh.triangle_signs(t)[i], 1.0);
            if let Some((t, i)) = edge.minus {
                assert_eq!(mesh.triangle_edges(t)[i], e);
                assert_eq!(mesh.triangle_signs(t)[i], -1.0);
            }
            assert!((math::norm(edge.normal) - 1.0).abs() < 1e-14);
            // normal points away from the plus centroid
            let c = mesh.centroid(edge.plus.0);
            let mid = mesh.edge_point(e, 0.5);
            assert!(math::dot(math::sub(mid, c), edge.normal) > 0.0);
        }
    }

    #[test]
    fn unit_square_counts() {
        for (n, t, v, e) in [(1, 2, 4, 5), (2, 8, 9, 16), (4, 32, 25, 56)] {
            let m = build_unit_square(n).unwrap();
            assert_eq!((m.num_triangles(), m.num_vertices(), m.num_edges()), (t, v, e));
            assert_eq!(m.euler_characteristic(), 1);
            assert_topology(&m);
        }
        let m = build_unit_square(4).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(build_unit_square(0), Err(MeshError::ZeroSubdivisions));
    }

    #[test]
    fn domain_areas() {
        for n in [1, 2, 3] {
            for kind in [
                DomainKind::UnitSquare,
                DomainKind::UnitTriangle,
                DomainKind::LShape,
                DomainKind::TShape,
            ] {
                let m = build_domain(kind, n).unwrap();
                assert!((m.total_area() - kind.area()).abs() < 1e-13, "{kind:?} {n}");
                assert!((m.boundary_length() - kind.perimeter()).abs() < 1e-12);
                assert_eq!(m.euler_characteristic(), 1);
                assert_topology(&m);
            }
        }
        assert!(matches!(build_domain_named("circle", 2), Err(MeshError::UnknownDomain(_))));
    }

    #[test]
    fn refinement_edge_is_longest_initially() {
        let m = build_domain(DomainKind::LShape, 2).unwrap();
        for t in 0..m.num_triangles() {
            let e = m.triangle_edges(t);
            assert!((m.edges()[e[0]].length - m.diameter(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn bisect_empty_is_identity() {
        let m = build_unit_square(2).unwrap();
        let r = m.bisect(&[]).unwrap();
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.triangles(), m.triangles());
    }

    #[test]
    fn bisect_single_triangle() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let r = m.bisect(&[0]).unwrap();
        assert_eq!(r.num_triangles(), 2);
        assert!((r.total_area() - 0.5).abs() < 1e-15);
        assert_eq!(r.parents(), &[0, 0]);
        // new vertex is the hypotenuse midpoint
        assert_eq!(r.vertices()[3], [0.5, 0.5]);
    }

    #[test]
    fn bisect_closure_keeps_conformity() {
        let m = build_unit_square(2).unwrap();
        let r = m.bisect(&[0]).unwrap();
        assert_eq!(r.euler_characteristic(), 1);
        assert!((r.boundary_length() - 4.0).abs() < 1e-13);
        assert!(r.num_triangles() > m.num_triangles());
        assert_topology(&r);
    }

    #[test]
    fn repeated_corner_refinement_stays_shape_regular() {
        let mut m = build_domain(DomainKind::LShape, 1).unwrap();
        let initial = m.min_angle();
        for _ in 0..12 {
            let marked: Vec<usize> = (0..m.num_triangles())
                .filter(|&t| math::norm(m.centroid(t)) < 0.3 || m.num_triangles() < 20)
                .collect();
            m = m.bisect(&marked).unwrap();
            assert_eq!(m.euler_characteristic(), 1);
            assert!((m.total_area() - 3.0).abs() < 3e-13);
        }
        assert!(m.min_angle() >= 0.5 * initial);
    }
}
