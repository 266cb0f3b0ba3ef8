//! Reference simplex: quadrature rules and the orthonormal modal basis.
//!
//! The reference interval is `[0, 1]`; the reference triangle has vertices
//! `(0,0), (1,0), (0,1)`. Quadrature weights are normalised to sum to one so
//! that an integral over a physical element `K` is `|K| * sum_q w_q f(x_q)`.
//! The basis is orthonormal for that normalised measure, which after the
//! affine map gives `int_K phi_p phi_q = |K| delta_pq` with `phi_0 = 1`.

use crate::angular::gauss_legendre;

/// Monomial exponents, ordered by total degree.
const MONO_1D: [(u32, u32); 3] = [(0, 0), (1, 0), (2, 0)];
const MONO_2D: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Quadrature nodes (reference coordinates) with weights summing to one.
#[derive(Debug, Clone)]
pub struct Rule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_unit(n: usize) -> Rule {
    let (x, w) = gauss_legendre(n).expect("positive order");
    Rule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
        weights: w.iter().map(|&v| 0.5 * v).collect(),
    }
}

/// 12-point symmetric rule on the reference triangle, exact for degree 6.
pub fn triangle_degree6() -> Rule {
    // (weight, barycentric orbit generator)
    let orbits3 = [
        (
            0.116_786_275_726_379,
            0.501_426_509_658_179,
            0.249_286_745_170_910,
        ),
        (
            0.050_844_906_370_207,
            0.873_821_971_016_996,
            0.063_089_014_491_502,
        ),
    ];
    let orbit6 = (
        0.082_851_075_618_374,
        [
            0.053_145_049_844_817,
            0.310_352_451_033_784,
            0.636_502_499_121_399,
        ],
    );
    let mut points = Vec::with_capacity(12);
    let mut weights = Vec::with_capacity(12);
    for (w, a, b) in orbits3 {
        for l in [[a, b, b], [b, a, b], [b, b, a]] {
            points.push([l[1], l[2]]);
            weights.push(w);
        }
    }
    let (w, l) = orbit6;
    for p in [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ] {
        points.push([l[p[1]], l[p[2]]]);
        weights.push(w);
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= s);
    Rule { points, weights }
}

/// Barycentric coordinates of a reference point.
#[inline]
pub fn barycentric(dim: usize, xi: [f64; 2]) -> [f64; 3] {
    match dim {
        1 => [1.0 - xi[0], xi[0], 0.0],
        _ => [1.0 - xi[0] - xi[1], xi[0], xi[1]],
    }
}

/// Orthonormal P^k basis on the reference simplex plus the tables used by
/// the element kernels.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub dim: usize,
    pub degree: usize,
    pub n_modes: usize,
    /// `coeffs[p][j]`: coefficient of monomial `j` in basis function `p`.
    pub coeffs: Vec<Vec<f64>>,
    pub volume: Rule,
    /// `vol_phi[q * L + p]`.
    pub vol_phi: Vec<f64>,
    /// Reference-coordinate gradients `vol_dphi[q * L + p]`.
    pub vol_dphi: Vec<[f64; 2]>,
    /// Parametric rule on a face (`[0, 1]`; a single unit-weight node in 1D).
    pub face_rule: Rule,
    /// Reference coordinates of face nodes: `face_points[f][q]`.
    pub face_points: Vec<Vec<[f64; 2]>>,
    /// `face_phi[f][q * L + p]`.
    pub face_phi: Vec<Vec<f64>>,
    /// `face_self[f][i * L + j] = sum_q w_q phi_i phi_j` on face `f`.
    pub face_self: Vec<Vec<f64>>,
    /// `face_cpl[(f * nf + g) * 2 + rev][i * L + j]`: `phi_i` on face `f` of
    /// this element against `phi_j` on face `g` of the neighbour, whose face
    /// nodes run in the opposite parametric direction when `rev == 1`.
    pub face_cpl: Vec<Vec<f64>>,
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        assert!(degree <= 2, "degree must be at most 2");
        let monos: &[(u32, u32)] = if dim == 1 { &MONO_1D } else { &MONO_2D };
        let n_modes = if dim == 1 {
            degree + 1
        } else {
            (degree + 1) * (degree + 2) / 2
        };
        let monos = &monos[..n_modes];
        let volume = if dim == 1 {
            gauss_unit(4)
        } else {
            triangle_degree6()
        };

        // Gram-Schmidt on monomials against the normalised volume rule.
        let eval_mono =
            |j: usize, x: [f64; 2]| x[0].powi(monos[j].0 as i32) * x[1].powi(monos[j].1 as i32);
        let inner = |a: &[f64], b: &[f64]| -> f64 {
            volume
                .points
                .iter()
                .zip(&volume.weights)
                .map(|(x, w)| {
                    let fa: f64 = a
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * eval_mono(j, *x))
                        .sum();
                    let fb: f64 = b
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * eval_mono(j, *x))
                        .sum();
                    w * fa * fb
                })
                .sum()
        };
        let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
        for p in 0..n_modes {
            let mut v = vec![0.0; n_modes];
            v[p] = 1.0;
            for _pass in 0..2 {
                for u in &coeffs {
                    let d = inner(&v, u);
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
                }
            }
            let nrm = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|a| *a /= nrm);
            coeffs.push(v);
        }

        let mut re = ReferenceElement {
            dim,
            degree,
            n_modes,
            coeffs,
            volume,
            vol_phi: Vec::new(),
            vol_dphi: Vec::new(),
            face_rule: if dim == 1 {
                Rule {
                    points: vec![[0.0, 0.0]],
                    weights: vec![1.0],
                }
            } else {
                gauss_unit(4)
            },
            face_points: Vec::new(),
            face_phi: Vec::new(),
            face_self: Vec::new(),
            face_cpl: Vec::new(),
        };
        let l = n_modes;
        for x in re.volume.points.clone() {
            let (v, g) = re.eval_with_grad(x);
            re.vol_phi.extend_from_slice(&v[..l]);
            re.vol_dphi.extend_from_slice(&g[..l]);
        }
        let nf = dim + 1;
        for f in 0..nf {
            let pts: Vec<[f64; 2]> = re
                .face_rule
                .points
                .iter()
                .map(|s| face_point(dim, f, s[0]))
                .collect();
            let mut phi = Vec::with_capacity(pts.len() * l);
            for x in &pts {
                phi.extend_from_slice(&re.eval(*x)[..l]);
            }
            re.face_points.push(pts);
            re.face_phi.push(phi);
        }
        let nq = re.face_rule.len();
        for f in 0..nf {
            let mut m = vec![0.0; l * l];
            for q in 0..nq {
                let w = re.face_rule.weights[q];
                for i in 0..l {
                    for j in 0..l {
                        m[i * l + j] += w * re.face_phi[f][q * l + i] * re.face_phi[f][q * l + j];
                    }
                }
            }
            re.face_self.push(m);
        }
        for f in 0..nf {
            for g in 0..nf {
                for rev in 0..2 {
                    let mut m = vec![0.0; l * l];
                    for q in 0..nq {
                        let qn = if rev == 1 { nq - 1 - q } else { q };
                        let w = re.face_rule.weights[q];
                        for i in 0..l {
                            for j in 0..l {
                                m[i * l + j] +=
                                    w * re.face_phi[f][q * l + i] * re.face_phi[g][qn * l + j];
                            }
                        }
                    }
                    re.face_cpl.push(m);
                }
            }
        }
        re
    }

    #[inline]
    pub fn cpl(&self, f: usize, g: usize, rev: bool) -> &[f64] {
        &self.face_cpl[(f * (self.dim + 1) + g) * 2 + rev as usize]
    }

    /// Basis values at a reference point (first `n_modes` entries used).
    pub fn eval(&self, x: [f64; 2]) -> [f64; 6] {
        let m = self.monomials(x);
        let mut out = [0.0; 6];
        for (p, c) in self.coeffs.iter().enumerate() {
            out[p] = c.iter().zip(&m).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Basis values and reference gradients.
    pub fn eval_with_grad(&self, x: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
        let (m, dm) = self.monomials_with_grad(x);
        let mut v = [0.0; 6];
        let mut g = [[0.0; 2]; 6];
        for (p, c) in self.coeffs.iter().enumerate() {
            for j in 0..c.len() {
                v[p] += c[j] * m[j];
                g[p][0] += c[j] * dm[j][0];
                g[p][1] += c[j] * dm[j][1];
            }
        }
        (v, g)
    }

    fn monomials(&self, x: [f64; 2]) -> [f64; 6] {
        match self.dim {
            1 => [1.0, x[0], x[0] * x[0], 0.0, 0.0, 0.0],
            _ => [1.0, x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]],
        }
    }

    fn monomials_with_grad(&self, x: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
        let v = self.monomials(x);
        let g = match self.dim {
            1 => [
                [0.0, 0.0],
                [1.0, 0.0],
                [2.0 * x[0], 0.0],
                [0.0; 2],
                [0.0; 2],
                [0.0; 2],
            ],
            _ => [
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [2.0 * x[0], 0.0],
                [x[1], x[0]],
                [0.0, 2.0 * x[1]],
            ],
        };
        (v, g)
    }
}

/// Reference point at parameter `s` on face `f` (opposite local vertex `f`,
/// running from vertex `(f+1) % 3` to `(f+2) % 3`).
pub fn face_point(dim: usize, f: usize, s: f64) -> [f64; 2] {
    match dim {
        1 => {
            if f == 0 {
                [1.0, 0.0]
            } else {
                [0.0, 0.0]
            }
        }
        _ => {
            const V: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
            let a = V[(f + 1) % 3];
            let b = V[(f + 2) % 3];
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
        }
    }
}
