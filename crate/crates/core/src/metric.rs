//! Hessian-based metric tensors, the regularization parameter, and the
//! intersection of the per-direction metrics.

use thiserror::Error;

use crate::dg::{DGField, ReferenceElement};
use crate::linalg::SmallMat;
use crate::mesh::{Point, SimplicialMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("Hessian recovery needs a field of degree >= 1 (got {0})")]
    DegreeTooLow(usize),
    #[error("tensor is not symmetric positive definite (element {element})")]
    NotSpd { element: usize },
    #[error("non-finite metric at element {element}")]
    NonFinite { element: usize },
    #[error("metric needs at least one element")]
    Empty,
    #[error("metric has {got} tensors, mesh has {expected} elements")]
    SizeMismatch { got: usize, expected: usize },
}

/// `true` when `m` is symmetric with positive trace and determinant.
pub fn is_spd(m: &SmallMat) -> bool {
    let sym = m.dim == 1
        || (m.a[0][1] - m.a[1][0]).abs()
            <= 1e-12 * (m.a[0][1].abs() + m.a[0][0].abs() + m.a[1][1].abs());
    sym && m.is_finite() && m.trace() > 0.0 && m.det() > 0.0
}

/// One sample of the field used by the least-squares fit: the polynomial
/// of `element` evaluated at a fixed reference point.
#[derive(Debug, Clone)]
struct Sample {
    element: usize,
    phi: [f64; 6],
    /// Contributions to `(H11, H12, H22)`.
    w: [f64; 3],
}

/// Precomputed least-squares stencils for Hessian recovery on one mesh.
///
/// Each element gets a quadratic fitted to the centroid values over its
/// face-neighbour 2-ring; where that is rank-deficient the fit also uses
/// vertex values of the element and its 1-ring. Elements whose fit is
/// still rank-deficient get `H = 0` and are listed in `flagged`.
#[derive(Debug, Clone)]
pub struct HessianRecovery {
    dim: usize,
    n_modes: usize,
    stencils: Vec<Vec<Sample>>,
    pub flagged: Vec<usize>,
}

/// Least-squares fit weights: rows of `(A^T A)^{-1} A^T` for the requested
/// columns, or `None` when `A` is numerically rank-deficient.
fn lsq_weights(rows: &[Vec<f64>], want: &[usize]) -> Option<Vec<Vec<f64>>> {
    let n = rows.first()?.len();
    if rows.len() < n {
        return None;
    }
    let mut ata = vec![0.0; n * n];
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                ata[i * n + j] += r[i] * r[j];
            }
        }
    }
    // Cholesky with a relative pivot threshold as the rank test.
    let dmax = (0..n).map(|i| ata[i * n + i]).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = ata[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 1e-10 * dmax {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = ata[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let solve = |b: &mut [f64]| {
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
    };
    // Row `c` of (A^T A)^{-1} A^T is A (A^T A)^{-1} e_c.
    Some(
        want.iter()
            .map(|&c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                solve(&mut e);
                rows.iter()
                    .map(|r| r.iter().zip(&e).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect(),
    )
}

fn reference_vertices(dim: usize) -> Vec<[f64; 2]> {
    if dim == 1 {
        vec![[0.0, 0.0], [1.0, 0.0]]
    } else {
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    }
}

impl HessianRecovery {
    pub fn new(mesh: &SimplicialMesh, re: &ReferenceElement) -> Result<Self, MetricError> {
        if re.degree < 1 {
            return Err(MetricError::DegreeTooLow(re.degree));
        }
        let dim = mesh.dim;
        let centroid_ref = if dim == 1 {
            [0.5, 0.0]
        } else {
            [1.0 / 3.0, 1.0 / 3.0]
        };
        let phi_c = re.eval(centroid_ref);
        let verts: Vec<([f64; 2], [f64; 6])> = reference_vertices(dim)
            .into_iter()
            .map(|v| (v, re.eval(v)))
            .collect();
        let mut stencils = Vec::with_capacity(mesh.n_elements());
        let mut flagged = Vec::new();
        for k in 0..mesh.n_elements() {
            let xc = mesh.centroid(k);
            let h = mesh.signed_measure(k).abs().powf(1.0 / dim as f64);
            let local = |x: Point| [(x[0] - xc[0]) / h, (x[1] - xc[1]) / h];
            let row = |p: [f64; 2]| -> Vec<f64> {
                if dim == 1 {
                    vec![1.0, p[0], p[0] * p[0]]
                } else {
                    vec![1.0, p[0], p[1], p[0] * p[0], p[0] * p[1], p[1] * p[1]]
                }
            };
            let mut patch = vec![k];
            patch.extend(mesh.face_rings(k, 2));
            let mut pts: Vec<(usize, [f64; 6], Point)> = patch
                .iter()
                .map(|&e| (e, phi_c, mesh.centroid(e)))
                .collect();
            let want: &[usize] = if dim == 1 { &[2] } else { &[3, 4, 5] };
            let mut fit = lsq_weights(
                &pts.iter().map(|s| row(local(s.2))).collect::<Vec<_>>(),
                want,
            );
            if fit.is_none() {
                let mut ring1 = vec![k];
                ring1.extend(mesh.face_rings(k, 1));
                for &e in &ring1 {
                    for (xi, phi) in &verts {
                        pts.push((e, *phi, crate::dg::field::map_to_physical(mesh, e, *xi)));
                    }
                }
                fit = lsq_weights(
                    &pts.iter().map(|s| row(local(s.2))).collect::<Vec<_>>(),
                    want,
                );
            }
            let Some(w) = fit else {
                flagged.push(k);
                stencils.push(Vec::new());
                continue;
            };
            let inv_h2 = 1.0 / (h * h);
            let st = pts
                .iter()
                .enumerate()
                .map(|(i, (e, phi, _))| {
                    let w = if dim == 1 {
                        [2.0 * w[0][i] * inv_h2, 0.0, 0.0]
                    } else {
                        [
                            2.0 * w[0][i] * inv_h2,
                            w[1][i] * inv_h2,
                            2.0 * w[2][i] * inv_h2,
                        ]
                    };
                    Sample {
                        element: *e,
                        phi: *phi,
                        w,
                    }
                })
                .collect();
            stencils.push(st);
        }
        Ok(HessianRecovery {
            dim,
            n_modes: re.n_modes,
            stencils,
            flagged,
        })
    }

    /// Recovered per-element Hessians of direction `m` of `field`.
    pub fn apply(&self, field: &DGField, m: usize) -> Vec<SmallMat> {
        let l = self.n_modes;
        self.stencils
            .iter()
            .map(|st| {
                let mut h = [0.0; 3];
                for s in st {
                    let c = field.element_coeffs(m, s.element);
                    let v: f64 = (0..l).map(|p| c[p] * s.phi[p]).sum();
                    for i in 0..3 {
                        h[i] += s.w[i] * v;
                    }
                }
                if self.dim == 1 {
                    SmallMat::scalar(h[0])
                } else {
                    SmallMat::sym2(h[0], h[1], h[2])
                }
            })
            .collect()
    }
}

/// `Q diag(|lambda_1|, |lambda_2|) Q^T`.
pub fn absolute_value(h: &SmallMat) -> SmallMat {
    if h.dim == 1 {
        return SmallMat::scalar(h.a[0][0].abs());
    }
    let (l, q) = h.sym_eigen();
    SmallMat::from_eigen([l[0].abs(), l[1].abs()], &q)
}

/// `det(B)^{-1/6} B` with `B = I + |H| / alpha`.
pub fn metric_from_hessian(abs_h: &SmallMat, alpha: f64) -> SmallMat {
    let b = SmallMat::identity(abs_h.dim).add(&abs_h.scale(1.0 / alpha));
    b.scale(b.det().powf(-1.0 / 6.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSolution {
    pub alpha: f64,
    /// No root: the curvature is too small everywhere and `alpha = 1`.
    pub clamped: bool,
    /// `|lhs - rhs| / rhs` at the returned alpha (0 when clamped).
    pub residual: f64,
}

/// `sqrt(det M(alpha))` from the eigenvalues of `|H|`.
fn sqrt_det_metric(dim: usize, lam: [f64; 2], alpha: f64) -> f64 {
    let det_b = if dim == 1 {
        1.0 + lam[0] / alpha
    } else {
        (1.0 + lam[0] / alpha) * (1.0 + lam[1] / alpha)
    };
    // det M = det(B)^{1 - dim/6}
    det_b.powf(0.5 * (1.0 - dim as f64 / 6.0))
}

/// Solve `sum |K| det(M_K(alpha))^{1/2} = 2 sum |K| det(|H_K|)^{1/3}` by
/// bisection on `log alpha` over `[1e-12, 1e12]`.
pub fn solve_alpha(abs_h: &[SmallMat], areas: &[f64]) -> Result<AlphaSolution, MetricError> {
    if abs_h.is_empty() || abs_h.len() != areas.len() {
        return Err(MetricError::Empty);
    }
    let dim = abs_h[0].dim;
    let lams: Vec<[f64; 2]> = abs_h
        .iter()
        .map(|h| {
            if dim == 1 {
                [h.a[0][0].abs(), 0.0]
            } else {
                let (l, _) = h.sym_eigen();
                [l[0].max(0.0), l[1].max(0.0)]
            }
        })
        .collect();
    let total: f64 = areas.iter().sum();
    let rhs: f64 = 2.0
        * abs_h
            .iter()
            .zip(areas)
            .map(|(h, a)| a * h.det().abs().cbrt())
            .sum::<f64>();
    let lhs = |alpha: f64| -> f64 {
        lams.iter()
            .zip(areas)
            .map(|(l, a)| a * sqrt_det_metric(dim, *l, alpha))
            .sum()
    };
    let clamp = AlphaSolution {
        alpha: 1.0,
        clamped: true,
        residual: 0.0,
    };
    if !(rhs > total) || !rhs.is_finite() {
        return Ok(clamp);
    }
    let (mut lo, mut hi) = (1e-12f64.ln(), 1e12f64.ln());
    if lhs(lo.exp()) < rhs {
        return Ok(clamp);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // lhs decreases in alpha
        if lhs(mid.exp()) > rhs {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let alpha = (0.5 * (lo + hi)).exp();
    Ok(AlphaSolution {
        alpha,
        clamped: false,
        residual: (lhs(alpha) - rhs).abs() / rhs,
    })
}

/// Intersection of two SPD tensors: with `P A P^T = I` and
/// `P B P^T = diag(b)`, returns `P^{-1} diag(max(1, b)) P^{-T}`.
pub fn intersect(a: &SmallMat, b: &SmallMat) -> Result<SmallMat, MetricError> {
    if !is_spd(a) || !is_spd(b) {
        return Err(MetricError::NotSpd {
            element: usize::MAX,
        });
    }
    if a.dim == 1 {
        return Ok(SmallMat::scalar(a.a[0][0].max(b.a[0][0])));
    }
    let l = a.cholesky().ok_or(MetricError::NotSpd {
        element: usize::MAX,
    })?;
    let p = l.inverse();
    let c = p.mul(b).mul(&p.transpose());
    let c = SmallMat::sym2(c.a[0][0], 0.5 * (c.a[0][1] + c.a[1][0]), c.a[1][1]);
    let (bl, q) = c.sym_eigen();
    let lq = l.mul(&q);
    let d = [bl[0].max(1.0), bl[1].max(1.0)];
    let mut r = SmallMat::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            r.a[i][j] = lq.a[i][0] * d[0] * lq.a[j][0] + lq.a[i][1] * d[1] * lq.a[j][1];
        }
    }
    let off = 0.5 * (r.a[0][1] + r.a[1][0]);
    r.a[0][1] = off;
    r.a[1][0] = off;
    Ok(r)
}

/// Left-to-right fold of [`intersect`] over directions.
pub fn combine_directions(per_direction: &[Vec<SmallMat>]) -> Result<Vec<SmallMat>, MetricError> {
    let first = per_direction.first().ok_or(MetricError::Empty)?;
    let mut out = first.clone();
    for metrics in &per_direction[1..] {
        for (k, (o, m)) in out.iter_mut().zip(metrics).enumerate() {
            *o = intersect(o, m).map_err(|_| MetricError::NotSpd { element: k })?;
        }
    }
    Ok(out)
}

/// `passes` sweeps of averaging each tensor with its face neighbours.
pub fn smooth(mesh: &SimplicialMesh, metrics: &[SmallMat], passes: usize) -> Vec<SmallMat> {
    let mut cur = metrics.to_vec();
    for _ in 0..passes {
        cur = (0..mesh.n_elements())
            .map(|k| {
                let mut acc = cur[k];
                let mut n = 1.0;
                for f in 0..=mesh.dim {
                    if let Some(nb) = mesh.neighbor(k, f) {
                        acc = acc.add(&cur[nb.element]);
                        n += 1.0;
                    }
                }
                acc.scale(1.0 / n)
            })
            .collect();
    }
    cur
}

/// Per-element metric of a mesh plus per-direction diagnostics.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub tensors: Vec<SmallMat>,
    pub alphas: Vec<AlphaSolution>,
    /// Elements whose Hessian fit was rank-deficient.
    pub flagged: Vec<usize>,
}

impl MetricField {
    pub fn uniform(dim: usize, n: usize) -> Self {
        MetricField {
            tensors: vec![SmallMat::identity(dim); n],
            alphas: Vec::new(),
            flagged: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        for (k, m) in self.tensors.iter().enumerate() {
            if !m.is_finite() {
                return Err(MetricError::NonFinite { element: k });
            }
            if !is_spd(m) {
                return Err(MetricError::NotSpd { element: k });
            }
        }
        Ok(())
    }
}

/// Metric for all directions of `field`: recover, regularize, intersect,
/// smooth.
pub fn build_metric(
    field: &DGField,
    recovery: &HessianRecovery,
    passes: usize,
) -> Result<MetricField, MetricError> {
    let mesh = &field.mesh;
    if recovery.stencils.len() != mesh.n_elements() {
        return Err(MetricError::SizeMismatch {
            got: recovery.stencils.len(),
            expected: mesh.n_elements(),
        });
    }
    let areas: Vec<f64> = mesh.measures();
    let mut per_direction = Vec::with_capacity(field.n_dirs);
    let mut alphas = Vec::with_capacity(field.n_dirs);
    for m in 0..field.n_dirs {
        let abs_h: Vec<SmallMat> = recovery
            .apply(field, m)
            .iter()
            .map(absolute_value)
            .collect();
        let sol = solve_alpha(&abs_h, &areas)?;
        per_direction.push(
            abs_h
                .iter()
                .map(|h| metric_from_hessian(h, sol.alpha))
                .collect::<Vec<_>>(),
        );
        alphas.push(sol);
    }
    let combined = combine_directions(&per_direction)?;
    let mf = MetricField {
        tensors: smooth(mesh, &combined, passes),
        alphas,
        flagged: recovery.flagged.clone(),
    };
    mf.validate()?;
    Ok(mf)
}
