//! Simplicial meshes (intervals in 1D, triangles in 2D) with fixed
//! connectivity, and the piecewise-linear-in-time vertex kinematics used
//! between two time levels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SmallMat;

pub type Point = [f64; 2];

/// Axis-aligned interval `[lo[0], hi[0]]` (1D) or rectangle (2D).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Self {
        Domain {
            dim: 1,
            lo: [a, 0.0],
            hi: [b, 0.0],
        }
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Domain {
            dim: 2,
            lo: [x0, y0],
            hi: [x1, y1],
        }
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|d| self.hi[d] - self.lo[d]).product()
    }

    pub fn scale(&self) -> f64 {
        (0..self.dim)
            .map(|d| self.hi[d] - self.lo[d])
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        (0..self.dim).all(|d| p[d] >= self.lo[d] - tol && p[d] <= self.hi[d] + tol)
    }
}

/// Role of a vertex during mesh movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VertexKind {
    Interior,
    /// On a straight side; may slide along `tangent`.
    Boundary {
        tangent: [f64; 2],
        axis: usize,
        value: f64,
    },
    /// Fixed point (domain corner in 2D, interval end in 1D).
    Corner,
}

/// Neighbor across a local face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceNeighbor {
    pub element: usize,
    pub face: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate domain (zero measure)")]
    DegenerateDomain,
    #[error("subdivision count must be at least 1")]
    ZeroSubdivision,
    #[error("element {element}: {kind}")]
    Invalid { element: usize, kind: Violation },
    #[error("vertex {vertex}: non-finite coordinates")]
    NonFiniteVertex { vertex: usize },
    #[error("meshes do not share connectivity")]
    ConnectivityMismatch,
    #[error("time {t} outside slab [{t0}, {t1}]")]
    OutsideSlab { t: f64, t0: f64, t1: f64 },
    #[error("malformed mesh: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    NonPositiveMeasure(f64),
    /// Measure positive at the slab ends but vanishing or negative in between.
    InvertsWithinSlab {
        t: f64,
        measure: f64,
    },
    TilingMismatch {
        total: f64,
        expected: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonPositiveMeasure(m) => write!(f, "non-positive measure {m:e}"),
            Violation::InvertsWithinSlab { t, measure } => {
                write!(
                    f,
                    "element inverts inside the time slab (t = {t}, measure {measure:e})"
                )
            }
            Violation::TilingMismatch { total, expected } => {
                write!(
                    f,
                    "elements cover {total} but the domain measures {expected}"
                )
            }
        }
    }
}

/// Mesh with fixed connectivity. Coordinates are the only mutable state.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub dim: usize,
    pub domain: Domain,
    pub vertices: Vec<Point>,
    /// Flat element-to-vertex table with stride `dim + 1`; 2D elements are
    /// counter-clockwise.
    pub elements: Vec<usize>,
    pub vertex_kinds: Vec<VertexKind>,
    /// `neighbors[k * (dim + 1) + f]` is the element across the face of `k`
    /// opposite its local vertex `f` (`None` on the boundary).
    pub neighbors: Vec<Option<FaceNeighbor>>,
    /// Element patch of each vertex.
    pub vertex_patches: Vec<Vec<usize>>,
}

impl SimplicialMesh {
    /// Uniform mesh: `n` equal intervals in 1D; `n x n` squares split by
    /// the bottom-left to top-right diagonal in 2D.
    pub fn build_uniform(domain: Domain, n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivision);
        }
        if !(domain.measure() > 0.0) {
            return Err(MeshError::DegenerateDomain);
        }
        match domain.dim {
            1 => {
                let h = (domain.hi[0] - domain.lo[0]) / n as f64;
                let vertices = (0..=n)
                    .map(|i| {
                        let x = if i == n {
                            domain.hi[0]
                        } else {
                            domain.lo[0] + i as f64 * h
                        };
                        [x, 0.0]
                    })
                    .collect();
                let elements = (0..n).flat_map(|i| [i, i + 1]).collect();
                Self::from_parts(domain, vertices, elements)
            }
            _ => {
                let hx = (domain.hi[0] - domain.lo[0]) / n as f64;
                let hy = (domain.hi[1] - domain.lo[1]) / n as f64;
                let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
                for j in 0..=n {
                    let y = if j == n {
                        domain.hi[1]
                    } else {
                        domain.lo[1] + j as f64 * hy
                    };
                    for i in 0..=n {
                        let x = if i == n {
                            domain.hi[0]
                        } else {
                            domain.lo[0] + i as f64 * hx
                        };
                        vertices.push([x, y]);
                    }
                }
                let id = |i: usize, j: usize| j * (n + 1) + i;
                let mut elements = Vec::with_capacity(6 * n * n);
                for j in 0..n {
                    for i in 0..n {
                        let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                        elements.extend_from_slice(&[a, b, c]);
                        elements.extend_from_slice(&[a, c, d]);
                    }
                }
                Self::from_parts(domain, vertices, elements)
            }
        }
    }

    /// Uniform 2D mesh with at least `target` triangles (smallest `n` with
    /// `2 n^2 >= target`).
    pub fn subdivisions_for(dim: usize, target_elements: usize) -> usize {
        match dim {
            1 => target_elements.max(1),
            _ => {
                let mut n = ((target_elements as f64 / 2.0).sqrt().floor() as usize).max(1);
                while 2 * n * n < target_elements {
                    n += 1;
                }
                n
            }
        }
    }

    /// Build connectivity for the given coordinates and element table.
    pub fn from_parts(
        domain: Domain,
        vertices: Vec<Point>,
        elements: Vec<usize>,
    ) -> Result<Self, MeshError> {
        let dim = domain.dim;
        let nv = dim + 1;
        if elements.len() % nv != 0 {
            return Err(MeshError::Malformed("element table length".into()));
        }
        if let Some(&bad) = elements.iter().find(|&&v| v >= vertices.len()) {
            return Err(MeshError::Malformed(format!(
                "vertex index {bad} out of range"
            )));
        }
        let n_el = elements.len() / nv;
        let mut vertex_patches = vec![Vec::new(); vertices.len()];
        for k in 0..n_el {
            for &v in &elements[k * nv..(k + 1) * nv] {
                vertex_patches[v].push(k);
            }
        }
        // Face matching by sorted vertex key.
        let mut faces: std::collections::HashMap<[usize; 2], (usize, usize)> =
            std::collections::HashMap::new();
        let mut neighbors = vec![None; n_el * nv];
        for k in 0..n_el {
            let el = &elements[k * nv..(k + 1) * nv];
            for f in 0..nv {
                let key = face_key(el, f);
                if let Some((k2, f2)) = faces.remove(&key) {
                    neighbors[k * nv + f] = Some(FaceNeighbor {
                        element: k2,
                        face: f2,
                    });
                    neighbors[k2 * nv + f2] = Some(FaceNeighbor {
                        element: k,
                        face: f,
                    });
                } else {
                    faces.insert(key, (k, f));
                }
            }
        }
        let vertex_kinds = vertices
            .iter()
            .map(|p| classify_vertex(&domain, *p))
            .collect();
        let mesh = SimplicialMesh {
            dim,
            domain,
            vertices,
            elements,
            vertex_kinds,
            neighbors,
            vertex_patches,
        };
        Ok(mesh)
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn element(&self, k: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.elements[k * nv..(k + 1) * nv]
    }

    #[inline]
    pub fn neighbor(&self, k: usize, f: usize) -> Option<FaceNeighbor> {
        self.neighbors[k * (self.dim + 1) + f]
    }

    /// Same connectivity, new coordinates.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        SimplicialMesh {
            vertices,
            ..self.clone()
        }
    }

    pub fn same_connectivity(&self, other: &SimplicialMesh) -> bool {
        self.dim == other.dim
            && self.elements == other.elements
            && self.vertices.len() == other.vertices.len()
    }

    /// Edge matrix `[x_1 - x_0, x_2 - x_0]` (columns) of element `k`.
    pub fn edge_matrix(&self, k: usize) -> SmallMat {
        edge_matrix_of(self.dim, &self.vertices, self.element(k))
    }

    /// Signed measure (length or area).
    pub fn signed_measure(&self, k: usize) -> f64 {
        signed_measure_of(self.dim, &self.vertices, self.element(k))
    }

    pub fn measures(&self) -> Vec<f64> {
        (0..self.n_elements())
            .map(|k| self.signed_measure(k))
            .collect()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let el = self.element(k);
        let inv = 1.0 / el.len() as f64;
        let mut c = [0.0, 0.0];
        for &v in el {
            c[0] += self.vertices[v][0] * inv;
            c[1] += self.vertices[v][1] * inv;
        }
        c
    }

    /// Vertices of the face of `k` opposite local vertex `f`, in the local
    /// order used for face quadrature (from `(f+1) % 3` to `(f+2) % 3`).
    pub fn face_vertices(&self, k: usize, f: usize) -> Vec<usize> {
        let el = self.element(k);
        match self.dim {
            1 => vec![el[1 - f]],
            _ => vec![el[(f + 1) % 3], el[(f + 2) % 3]],
        }
    }

    /// Outward unit normal and measure of face `f` of element `k`.
    pub fn face_normal(&self, k: usize, f: usize) -> ([f64; 2], f64) {
        let el = self.element(k);
        match self.dim {
            1 => {
                let s = (self.vertices[el[1]][0] - self.vertices[el[0]][0]).signum();
                if f == 0 {
                    ([s, 0.0], 1.0)
                } else {
                    ([-s, 0.0], 1.0)
                }
            }
            _ => {
                let a = self.vertices[el[(f + 1) % 3]];
                let b = self.vertices[el[(f + 2) % 3]];
                let d = [b[0] - a[0], b[1] - a[1]];
                let len = d[0].hypot(d[1]);
                ([d[1] / len, -d[0] / len], len)
            }
        }
    }

    /// Checks positive measures, tiling of the domain and finiteness.
    pub fn validate(&self) -> Result<(), MeshError> {
        if let Some(v) = self
            .vertices
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(MeshError::NonFiniteVertex { vertex: v });
        }
        let mut total = 0.0;
        for k in 0..self.n_elements() {
            let m = self.signed_measure(k);
            if !(m > 0.0) {
                return Err(MeshError::Invalid {
                    element: k,
                    kind: Violation::NonPositiveMeasure(m),
                });
            }
            total += m;
        }
        let expected = self.domain.measure();
        if (total - expected).abs() > 1e-9 * expected {
            return Err(MeshError::Invalid {
                element: 0,
                kind: Violation::TilingMismatch { total, expected },
            });
        }
        Ok(())
    }

    pub fn min_measure(&self) -> f64 {
        (0..self.n_elements())
            .map(|k| self.signed_measure(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Face-neighbor rings around `k` (excluding `k`), up to `depth` rings.
    pub fn face_rings(&self, k: usize, depth: usize) -> Vec<usize> {
        let nv = self.dim + 1;
        let mut seen = vec![k];
        let mut frontier = vec![k];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &e in &frontier {
                for f in 0..nv {
                    if let Some(nb) = self.neighbor(e, f) {
                        if !seen.contains(&nb.element) {
                            seen.push(nb.element);
                            next.push(nb.element);
                        }
                    }
                }
            }
            frontier = next;
        }
        seen.remove(0);
        seen
    }
}

fn face_key(el: &[usize], f: usize) -> [usize; 2] {
    match el.len() {
        2 => [el[1 - f], usize::MAX],
        _ => {
            let a = el[(f + 1) % 3];
            let b = el[(f + 2) % 3];
            [a.min(b), a.max(b)]
        }
    }
}

fn classify_vertex(domain: &Domain, p: Point) -> VertexKind {
    let tol = 1e-12 * domain.scale().max(1.0);
    let mut on = Vec::new();
    for d in 0..domain.dim {
        if (p[d] - domain.lo[d]).abs() <= tol {
            on.push((d, domain.lo[d]));
        } else if (p[d] - domain.hi[d]).abs() <= tol {
            on.push((d, domain.hi[d]));
        }
    }
    match (domain.dim, on.len()) {
        (_, 0) => VertexKind::Interior,
        (1, _) => VertexKind::Corner,
        (_, 1) => {
            let (axis, value) = on[0];
            let tangent = if axis == 0 { [0.0, 1.0] } else { [1.0, 0.0] };
            VertexKind::Boundary {
                tangent,
                axis,
                value,
            }
        }
        _ => VertexKind::Corner,
    }
}

pub(crate) fn edge_matrix_of(dim: usize, vertices: &[Point], el: &[usize]) -> SmallMat {
    let x0 = vertices[el[0]];
    match dim {
        1 => SmallMat::scalar(vertices[el[1]][0] - x0[0]),
        _ => {
            let x1 = vertices[el[1]];
            let x2 = vertices[el[2]];
            SmallMat::from_rows(
                [x1[0] - x0[0], x2[0] - x0[0]],
                [x1[1] - x0[1], x2[1] - x0[1]],
            )
        }
    }
}

pub(crate) fn signed_measure_of(dim: usize, vertices: &[Point], el: &[usize]) -> f64 {
    let e = edge_matrix_of(dim, vertices, el);
    match dim {
        1 => e.det(),
        _ => 0.5 * e.det(),
    }
}

/// Two meshes with identical connectivity at `t0 < t1`; vertices move on
/// straight lines in between.
#[derive(Debug, Clone)]
pub struct MovingMesh {
    pub old: SimplicialMesh,
    pub new: SimplicialMesh,
    pub t0: f64,
    pub t1: f64,
}

impl MovingMesh {
    pub fn new(
        old: SimplicialMesh,
        new: SimplicialMesh,
        t0: f64,
        t1: f64,
    ) -> Result<Self, MeshError> {
        if !old.same_connectivity(&new) {
            return Err(MeshError::ConnectivityMismatch);
        }
        let mm = MovingMesh { old, new, t0, t1 };
        if mm
            .velocities()
            .iter()
            .any(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(MeshError::Malformed("non-finite vertex velocity".into()));
        }
        Ok(mm)
    }

    pub fn dt(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Constant vertex velocities over the slab.
    pub fn velocities(&self) -> Vec<[f64; 2]> {
        let dt = self.dt();
        self.old
            .vertices
            .iter()
            .zip(&self.new.vertices)
            .map(|(a, b)| [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt])
            .collect()
    }

    /// Vertex positions and velocities at time `t`.
    pub fn at_time(&self, t: f64) -> Result<(Vec<Point>, Vec<[f64; 2]>), MeshError> {
        let eps = 1e-14 * self.t1.abs().max(1.0);
        if t < self.t0 - eps || t > self.t1 + eps {
            return Err(MeshError::OutsideSlab {
                t,
                t0: self.t0,
                t1: self.t1,
            });
        }
        if t == self.t0 {
            return Ok((self.old.vertices.clone(), self.velocities()));
        }
        if t == self.t1 {
            return Ok((self.new.vertices.clone(), self.velocities()));
        }
        let dt = self.dt();
        let a = (self.t1 - t) / dt;
        let b = (t - self.t0) / dt;
        let pos = self
            .old
            .vertices
            .iter()
            .zip(&self.new.vertices)
            .map(|(p, q)| [p[0] * a + q[0] * b, p[1] * a + q[1] * b])
            .collect();
        Ok((pos, self.velocities()))
    }

    /// Validity at both ends and, in 2D, at the interior extremum of each
    /// element's (quadratic in time) area.
    pub fn validate(&self) -> Result<(), MeshError> {
        self.old.validate()?;
        self.new.validate()?;
        self.check_within_slab()
    }

    /// Interior-of-slab positivity only (endpoints not checked).
    pub fn check_within_slab(&self) -> Result<(), MeshError> {
        if self.old.dim == 1 {
            return Ok(());
        }
        for k in 0..self.old.n_elements() {
            let el = self.old.element(k);
            // area(s) = a0 + a1 s + a2 s^2 for s in [0, 1]
            let e0 = edge_matrix_of(2, &self.old.vertices, el);
            let e1 = edge_matrix_of(2, &self.new.vertices, el);
            let de = e1.sub(&e0);
            let a0 = e0.det();
            let a2 = de.det();
            let a1 = e0.a[0][0] * de.a[1][1] + de.a[0][0] * e0.a[1][1]
                - e0.a[0][1] * de.a[1][0]
                - de.a[0][1] * e0.a[1][0];
            if a2 != 0.0 {
                let s = -a1 / (2.0 * a2);
                if s > 0.0 && s < 1.0 {
                    let m = 0.5 * (a0 + a1 * s + a2 * s * s);
                    if !(m > 0.0) {
                        return Err(MeshError::Invalid {
                            element: k,
                            kind: Violation::InvertsWithinSlab {
                                t: self.t0 + s * self.dt(),
                                measure: m,
                            },
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> SimplicialMesh {
        SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 1.0), n).unwrap()
    }

    #[test]
    fn uniform_square_counts_and_tiling() {
        let m = unit_square(2);
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.n_vertices(), 9);
        let total: f64 = m.measures().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn uniform_interval_has_requested_cells() {
        let m = SimplicialMesh::build_uniform(Domain::interval(0.0, 1.0), 80).unwrap();
        assert_eq!(m.n_elements(), 80);
        assert_eq!(m.vertex_kinds[0], VertexKind::Corner);
        assert_eq!(m.vertex_kinds[80], VertexKind::Corner);
        m.validate().unwrap();
    }

    #[test]
    fn reference_mesh_size_rounds_up() {
        assert_eq!(SimplicialMesh::subdivisions_for(2, 57600), 170);
        assert_eq!(2 * 170 * 170, 57800);
        assert_eq!(SimplicialMesh::subdivisions_for(2, 3200), 40);
        assert_eq!(SimplicialMesh::subdivisions_for(2, 8), 2);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert_eq!(
            SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 0.0), 2).unwrap_err(),
            MeshError::DegenerateDomain
        );
        assert_eq!(
            SimplicialMesh::build_uniform(Domain::interval(0.0, 1.0), 0).unwrap_err(),
            MeshError::ZeroSubdivision
        );
    }

    #[test]
    fn connectivity_is_consistent() {
        let m = unit_square(3);
        for k in 0..m.n_elements() {
            for f in 0..3 {
                if let Some(nb) = m.neighbor(k, f) {
                    let back = m.neighbor(nb.element, nb.face).unwrap();
                    assert_eq!(
                        back,
                        FaceNeighbor {
                            element: k,
                            face: f
                        }
                    );
                    let mut a = m.face_vertices(k, f);
                    let mut b = m.face_vertices(nb.element, nb.face);
                    a.sort();
                    b.sort();
                    assert_eq!(a, b);
                } else {
                    // boundary face: both vertices on the boundary
                    for v in m.face_vertices(k, f) {
                        assert_ne!(m.vertex_kinds[v], VertexKind::Interior);
                    }
                }
            }
        }
        for (v, patch) in m.vertex_patches.iter().enumerate() {
            for &k in patch {
                assert!(m.element(k).contains(&v));
            }
        }
        let boundary_faces = (0..m.n_elements() * 3)
            .filter(|i| m.neighbors[*i].is_none())
            .count();
        assert_eq!(boundary_faces, 4 * 3);
    }

    #[test]
    fn normals_point_outward() {
        let m = unit_square(1);
        for k in 0..m.n_elements() {
            let c = m.centroid(k);
            for f in 0..3 {
                let (n, len) = m.face_normal(k, f);
                let fv = m.face_vertices(k, f);
                let mid = [
                    0.5 * (m.vertices[fv[0]][0] + m.vertices[fv[1]][0]),
                    0.5 * (m.vertices[fv[0]][1] + m.vertices[fv[1]][1]),
                ];
                assert!((mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1] > 0.0);
                assert!(len > 0.0);
            }
        }
    }

    #[test]
    fn swapped_vertices_are_reported() {
        let mut m = unit_square(2);
        m.elements.swap(3 * 5 + 1, 3 * 5 + 2);
        match m.validate() {
            Err(MeshError::Invalid {
                element,
                kind: Violation::NonPositiveMeasure(_),
            }) => assert_eq!(element, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vertex_pushed_across_opposite_edge_is_reported() {
        let m = unit_square(2);
        // Centre vertex (index 4) is shared by six triangles; pushing it past
        // the top-right corner flips the ones on that side.
        let mut v = m.vertices.clone();
        v[4] = [1.2, 1.3];
        let bad = m.with_vertices(v);
        assert!(matches!(bad.validate(), Err(MeshError::Invalid { .. })));
    }

    #[test]
    fn kinematics_endpoints_and_midpoint() {
        let old = unit_square(2);
        let mut v = old.vertices.clone();
        v[4] = [0.6, 0.45];
        let new = old.with_vertices(v);
        let mm = MovingMesh::new(old.clone(), new.clone(), 1.0, 1.5).unwrap();
        let (p0, _) = mm.at_time(1.0).unwrap();
        assert_eq!(p0, old.vertices);
        let (pm, vel) = mm.at_time(1.25).unwrap();
        assert!((pm[4][0] - 0.55).abs() < 1e-15 && (pm[4][1] - 0.475).abs() < 1e-15);
        assert!((vel[4][0] - 0.2).abs() < 1e-14 && (vel[4][1] + 0.1).abs() < 1e-14);
        assert!(mm.at_time(1.6).is_err());
        mm.validate().unwrap();

        let fixed = MovingMesh::new(old.clone(), old.clone(), 0.0, 0.1).unwrap();
        let (_, vel) = fixed.at_time(0.05).unwrap();
        assert!(vel.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn inversion_inside_slab_is_caught() {
        // Two vertices pass through the third at mid-slab: area (1-2s)^2 / 2.
        let dom = Domain::rectangle(0.0, 1.0, 0.0, 1.0);
        let old = SimplicialMesh::from_parts(
            dom,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![0, 1, 2],
        )
        .unwrap();
        let new = old.with_vertices(vec![[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]]);
        assert!(new.signed_measure(0) > 0.0);
        let mm = MovingMesh {
            old,
            new,
            t0: 0.0,
            t1: 1.0,
        };
        match mm.check_within_slab() {
            Err(MeshError::Invalid {
                kind: Violation::InvertsWithinSlab { t, .. },
                ..
            }) => assert!((t - 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
