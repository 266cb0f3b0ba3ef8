use std::sync::Arc;

use super::reference::{barycentric, ReferenceElement};
use super::SolveError;
use crate::mesh::{Point, SimplicialMesh};

/// Modal coefficients `I_{m,K}^{[p]}` for every direction, element and mode,
/// stored direction-major: `coeffs[(m * N + K) * L + p]`.
#[derive(Debug, Clone)]
pub struct DGField {
    pub degree: usize,
    pub n_modes: usize,
    pub n_dirs: usize,
    pub mesh: Arc<SimplicialMesh>,
    pub coeffs: Vec<f64>,
    pub time: f64,
}

/// Physical point of reference coordinates `xi` in element `k`.
#[inline]
pub fn map_to_physical(mesh: &SimplicialMesh, k: usize, xi: [f64; 2]) -> Point {
    let el = mesh.element(k);
    let x0 = mesh.vertices[el[0]];
    match mesh.dim {
        1 => [x0[0] + xi[0] * (mesh.vertices[el[1]][0] - x0[0]), 0.0],
        _ => {
            let x1 = mesh.vertices[el[1]];
            let x2 = mesh.vertices[el[2]];
            [
                x0[0] + xi[0] * (x1[0] - x0[0]) + xi[1] * (x2[0] - x0[0]),
                x0[1] + xi[0] * (x1[1] - x0[1]) + xi[1] * (x2[1] - x0[1]),
            ]
        }
    }
}

/// Reference coordinates of a physical point with respect to element `k`.
#[inline]
pub fn map_to_reference(mesh: &SimplicialMesh, k: usize, x: Point) -> [f64; 2] {
    let x0 = mesh.vertices[mesh.element(k)[0]];
    let inv = mesh.edge_matrix(k).inverse();
    inv.mul_vec([x[0] - x0[0], x[1] - x0[1]])
}

impl DGField {
    pub fn zeros(mesh: Arc<SimplicialMesh>, degree: usize, n_dirs: usize, time: f64) -> Self {
        let n_modes = n_modes(mesh.dim, degree);
        let coeffs = vec![0.0; n_dirs * mesh.n_elements() * n_modes];
        DGField {
            degree,
            n_modes,
            n_dirs,
            mesh,
            coeffs,
            time,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    #[inline]
    pub fn element_coeffs(&self, m: usize, k: usize) -> &[f64] {
        let l = self.n_modes;
        let base = (m * self.n_elements() + k) * l;
        &self.coeffs[base..base + l]
    }

    #[inline]
    pub fn element_coeffs_mut(&mut self, m: usize, k: usize) -> &mut [f64] {
        let l = self.n_modes;
        let base = (m * self.n_elements() + k) * l;
        &mut self.coeffs[base..base + l]
    }

    pub fn direction_slice(&self, m: usize) -> &[f64] {
        let s = self.n_elements() * self.n_modes;
        &self.coeffs[m * s..(m + 1) * s]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    /// Modal sum at a reference point of element `k`.
    pub fn eval_reference(&self, re: &ReferenceElement, m: usize, k: usize, xi: [f64; 2]) -> f64 {
        let phi = re.eval(xi);
        self.element_coeffs(m, k)
            .iter()
            .zip(&phi)
            .map(|(c, p)| c * p)
            .sum()
    }

    /// Value of direction `m` at physical point `x`, which must lie in `k`.
    pub fn eval(
        &self,
        re: &ReferenceElement,
        m: usize,
        k: usize,
        x: Point,
    ) -> Result<f64, SolveError> {
        let xi = map_to_reference(&self.mesh, k, x);
        let lam = barycentric(self.mesh.dim, xi);
        let tol = 1e-12;
        if lam[..self.mesh.dim + 1]
            .iter()
            .any(|&l| l < -tol || l > 1.0 + tol)
        {
            return Err(SolveError::PointOutsideElement {
                element: k,
                point: x,
            });
        }
        Ok(self.eval_reference(re, m, k, xi))
    }

    /// Angular mean `sum_m w_m I_m` per element (modal).
    pub fn angular_mean(&self, weights: &[f64]) -> Vec<f64> {
        let s = self.n_elements() * self.n_modes;
        let mut out = vec![0.0; s];
        for (m, w) in weights.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.direction_slice(m)) {
                *o += w * c;
            }
        }
        out
    }
}

pub fn n_modes(dim: usize, degree: usize) -> usize {
    if dim == 1 {
        degree + 1
    } else {
        (degree + 1) * (degree + 2) / 2
    }
}

/// Element-wise L2 projection of `f(x, m)` for `n_dirs` directions.
pub fn project_all(
    mesh: Arc<SimplicialMesh>,
    re: &ReferenceElement,
    n_dirs: usize,
    time: f64,
    f: impl Fn(Point, usize) -> f64,
) -> DGField {
    let mut field = DGField::zeros(mesh.clone(), re.degree, n_dirs, time);
    let l = re.n_modes;
    let nq = re.volume.len();
    let mut xs = Vec::with_capacity(nq);
    for k in 0..mesh.n_elements() {
        xs.clear();
        xs.extend(
            re.volume
                .points
                .iter()
                .map(|xi| map_to_physical(&mesh, k, *xi)),
        );
        for m in 0..n_dirs {
            let c = field.element_coeffs_mut(m, k);
            for (q, x) in xs.iter().enumerate() {
                let v = f(*x, m) * re.volume.weights[q];
                for p in 0..l {
                    c[p] += v * re.vol_phi[q * l + p];
                }
            }
        }
    }
    field
}

/// Single-direction projection.
pub fn project(
    mesh: Arc<SimplicialMesh>,
    re: &ReferenceElement,
    f: impl Fn(Point) -> f64,
) -> DGField {
    project_all(mesh, re, 1, 0.0, |x, _| f(x))
}
