//! MMPDE mesh movement in the indirect (computational-mesh) formulation.
//!
//! The physical mesh `T_h^n` is frozen while computational coordinates
//! `xi` follow the gradient flow of the meshing functional
//!
//! ```text
//! I_h = sum_K |K| G(J_K, det J_K, M_K),   J_K = E_{K_c} E_K^{-1},
//! G = 1/3 sqrt(det M) tr(J M^{-1} J^T)^2 + 4/3 sqrt(det M) (det J / sqrt(det M))^2,
//! ```
//!
//! starting from the reference computational mesh. The new physical mesh
//! is the image of the reference mesh under the piecewise-linear map from
//! the evolved computational mesh to `T_h^n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SmallMat;
use crate::mesh::{
    edge_matrix_of, signed_measure_of, MeshError, Point, SimplicialMesh, VertexKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmpdeError {
    #[error("degenerate element {element} (det E = {det:e})")]
    Degenerate { element: usize, det: f64 },
    #[error("metric has {got} tensors, mesh has {expected} elements")]
    SizeMismatch { got: usize, expected: usize },
    #[error("computational element {element} would invert even at the minimum substep {dt:e} (t = {t:e})")]
    Inversion { element: usize, dt: f64, t: f64 },
    #[error("reference vertex {vertex} at {point:?} is outside the computational mesh")]
    PointLocation { vertex: usize, point: Point },
    #[error("new physical mesh invalid: {0}")]
    InvalidMesh(#[from] MeshError),
    #[error("meshes do not share connectivity")]
    ConnectivityMismatch,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MmpdeOptions {
    /// Relaxation time; `None` uses the problem default.
    pub tau: Option<f64>,
    /// Explicit Euler substeps per integration interval to start with.
    pub initial_substeps: usize,
    /// Cap on accepted substeps; the smallest substep is
    /// `interval / max_substeps`.
    pub max_substeps: usize,
    /// A substep is retried at half size when a computational element
    /// shrinks below this fraction of its area.
    pub min_area_ratio: f64,
    /// Allowed relative energy increase per substep (round-off).
    pub energy_tol: f64,
    /// Linearly implicit substeps with the vertex-diagonal blocks of the
    /// Jacobian, or explicit Euler. Default: implicit in 2D, explicit in 1D.
    pub implicit: Option<bool>,
    /// A full-size substep moves a vertex at most this fraction of the
    /// smallest altitude of its patch; smaller substeps proportionally less.
    pub max_displacement: f64,
}

impl Default for MmpdeOptions {
    fn default() -> Self {
        MmpdeOptions {
            tau: None,
            initial_substeps: 5,
            max_substeps: 1000,
            min_area_ratio: 0.1,
            energy_tol: 1e-12,
            implicit: None,
            max_displacement: 0.5,
        }
    }
}

/// `G(J, det J, M)`.
pub fn g_value(j: &SmallMat, det_j: f64, m: &SmallMat) -> f64 {
    let sd = m.det().sqrt();
    let tr = j.mul(&m.inverse()).mul(&j.transpose()).trace();
    sd * tr * tr / 3.0 + 4.0 / 3.0 * sd * (det_j / sd).powi(2)
}

/// `(dG/dJ, dG/d det J)` with `dG/dJ = 4/3 sqrt(det M) tr(J M^{-1} J^T) M^{-1} J^T`
/// and `dG/d det J = 8/3 det J / sqrt(det M)`.
///
/// The matrix derivative is in transposed layout: its entry `(i, j)` is
/// the partial derivative with respect to `J_ji`.
pub fn g_derivatives(j: &SmallMat, det_j: f64, m: &SmallMat) -> (SmallMat, f64) {
    let sd = m.det().sqrt();
    let mi = m.inverse();
    let tr = j.mul(&mi).mul(&j.transpose()).trace();
    let dj = mi.mul(&j.transpose()).scale(4.0 / 3.0 * sd * tr);
    (dj, 8.0 / 3.0 * det_j / sd)
}

fn check_metric(mesh: &SimplicialMesh, metric: &[SmallMat]) -> Result<(), MmpdeError> {
    if metric.len() != mesh.n_elements() {
        return Err(MmpdeError::SizeMismatch {
            got: metric.len(),
            expected: mesh.n_elements(),
        });
    }
    Ok(())
}

/// Physical edge matrices, their inverses and measures.
struct Frozen {
    e_inv: Vec<SmallMat>,
    det_e: Vec<f64>,
    area: Vec<f64>,
}

impl Frozen {
    fn new(physical: &SimplicialMesh) -> Result<Self, MmpdeError> {
        let n = physical.n_elements();
        let mut f = Frozen {
            e_inv: Vec::with_capacity(n),
            det_e: Vec::with_capacity(n),
            area: Vec::with_capacity(n),
        };
        for k in 0..n {
            let e = physical.edge_matrix(k);
            let d = e.det();
            if !(d > 0.0) {
                return Err(MmpdeError::Degenerate { element: k, det: d });
            }
            f.e_inv.push(e.inverse());
            f.det_e.push(d);
            f.area.push(physical.signed_measure(k));
        }
        Ok(f)
    }
}

fn energy_with(
    physical: &SimplicialMesh,
    fr: &Frozen,
    xi: &[Point],
    metric: &[SmallMat],
) -> Result<f64, MmpdeError> {
    let mut total = 0.0;
    for k in 0..physical.n_elements() {
        let ec = edge_matrix_of(physical.dim, xi, physical.element(k));
        let j = ec.mul(&fr.e_inv[k]);
        let det_j = ec.det() / fr.det_e[k];
        total += fr.area[k] * g_value(&j, det_j, &metric[k]);
    }
    Ok(total)
}

/// The meshing functional for computational coordinates `xi` on the
/// connectivity of `physical`.
pub fn energy(
    physical: &SimplicialMesh,
    xi: &[Point],
    metric: &[SmallMat],
) -> Result<f64, MmpdeError> {
    check_metric(physical, metric)?;
    energy_with(physical, &Frozen::new(physical)?, xi, metric)
}

/// Contribution of element `k` to `-grad_xi I_h` at its local vertices.
fn element_neg_gradient(
    physical: &SimplicialMesh,
    fr: &Frozen,
    xi: &[Point],
    metric: &[SmallMat],
    k: usize,
) -> Result<[[f64; 2]; 3], MmpdeError> {
    let dim = physical.dim;
    let el = physical.element(k);
    let ec = edge_matrix_of(dim, xi, el);
    let det_ec = ec.det();
    if !(det_ec > 0.0) {
        return Err(MmpdeError::Degenerate {
            element: k,
            det: det_ec,
        });
    }
    let j = ec.mul(&fr.e_inv[k]);
    let det_j = det_ec / fr.det_e[k];
    let (dj, dd) = g_derivatives(&j, det_j, &metric[k]);
    let v = fr.e_inv[k]
        .mul(&dj)
        .scale(-1.0)
        .sub(&ec.inverse().scale(dd * det_j));
    let a = fr.area[k];
    let mut out = [[0.0; 2]; 3];
    for b in 1..=dim {
        for c in 0..dim {
            let vb = v.a[b - 1][c];
            out[b][c] = a * vb;
            out[0][c] -= a * vb;
        }
    }
    Ok(out)
}

/// `-grad_xi I_h` per vertex, before boundary treatment and scaling.
fn neg_gradient(
    physical: &SimplicialMesh,
    fr: &Frozen,
    xi: &[Point],
    metric: &[SmallMat],
) -> Result<Vec<[f64; 2]>, MmpdeError> {
    let mut g = vec![[0.0; 2]; physical.n_vertices()];
    for k in 0..physical.n_elements() {
        let c = element_neg_gradient(physical, fr, xi, metric, k)?;
        for (b, &vert) in physical.element(k).iter().enumerate() {
            g[vert][0] += c[b][0];
            g[vert][1] += c[b][1];
        }
    }
    Ok(g)
}

/// Diagonal blocks `d g_j / d xi_j` of the Jacobian of `g = -grad I_h`, by
/// forward differences over each vertex patch.
fn gradient_diagonal_blocks(
    physical: &SimplicialMesh,
    fr: &Frozen,
    xi: &[Point],
    metric: &[SmallMat],
    g: &[[f64; 2]],
) -> Result<Vec<SmallMat>, MmpdeError> {
    let dim = physical.dim;
    let mut work = xi.to_vec();
    let mut out = Vec::with_capacity(xi.len());
    for (j, patch) in physical.vertex_patches.iter().enumerate() {
        let size = patch
            .iter()
            .map(|&k| {
                signed_measure_of(dim, xi, physical.element(k))
                    .abs()
                    .powf(1.0 / dim as f64)
            })
            .fold(f64::INFINITY, f64::min);
        let eps = 1e-7 * size;
        let mut blk = SmallMat::zeros(dim);
        for c in 0..dim {
            work[j][c] = xi[j][c] + eps;
            let mut gp = [0.0; 2];
            for &k in patch {
                let b = physical
                    .element(k)
                    .iter()
                    .position(|&v| v == j)
                    .expect("vertex in its patch");
                let e = element_neg_gradient(physical, fr, &work, metric, k)?;
                gp[0] += e[b][0];
                gp[1] += e[b][1];
            }
            work[j][c] = xi[j][c];
            for r in 0..dim {
                blk.a[r][c] = (gp[r] - g[j][r]) / eps;
            }
        }
        out.push(blk);
    }
    Ok(out)
}

/// `h (I + h S)^{-1} v` with `S` the positive part of `-sym(B)`, restricted
/// to the directions a vertex may move in.
fn implicit_increment(
    kind: &VertexKind,
    dim: usize,
    b: &SmallMat,
    v: [f64; 2],
    h: f64,
) -> [f64; 2] {
    match kind {
        VertexKind::Corner => [0.0, 0.0],
        VertexKind::Boundary { tangent, .. } if dim == 2 => {
            let t = *tangent;
            let s = (-b.quad_form(t)).max(0.0);
            let vt = v[0] * t[0] + v[1] * t[1];
            let d = h * vt / (1.0 + h * s);
            [d * t[0], d * t[1]]
        }
        _ if dim == 1 => {
            let s = (-b.a[0][0]).max(0.0);
            [h * v[0] / (1.0 + h * s), 0.0]
        }
        _ => {
            let sym = SmallMat::sym2(-b.a[0][0], -0.5 * (b.a[0][1] + b.a[1][0]), -b.a[1][1]);
            let (vals, vecs) = sym.sym_eigen();
            let shifted = [1.0 + h * vals[0].max(0.0), 1.0 + h * vals[1].max(0.0)];
            let inv = SmallMat::from_eigen([1.0 / shifted[0], 1.0 / shifted[1]], &vecs);
            let d = inv.mul_vec(v);
            [h * d[0], h * d[1]]
        }
    }
}

/// Smallest distance from each vertex to the opposite facet of an element
/// of its patch.
fn patch_altitudes(conn: &SimplicialMesh, xi: &[Point]) -> Vec<f64> {
    let dim = conn.dim;
    let mut out = vec![f64::INFINITY; xi.len()];
    for k in 0..conn.n_elements() {
        let el = conn.element(k);
        let m = signed_measure_of(dim, xi, el).abs();
        for (a, &v) in el.iter().enumerate() {
            let h = if dim == 1 {
                m
            } else {
                let (p, q) = (xi[el[(a + 1) % 3]], xi[el[(a + 2) % 3]]);
                2.0 * m / (p[0] - q[0]).hypot(p[1] - q[1])
            };
            out[v] = out[v].min(h);
        }
    }
    out
}

/// Vertex metric: area-weighted average of the element metrics of the patch.
fn vertex_sqrt_det(physical: &SimplicialMesh, fr: &Frozen, metric: &[SmallMat]) -> Vec<f64> {
    physical
        .vertex_patches
        .iter()
        .map(|patch| {
            let mut acc = SmallMat::zeros(physical.dim);
            let mut w = 0.0;
            for &k in patch {
                acc = acc.add(&metric[k].scale(fr.area[k]));
                w += fr.area[k];
            }
            acc.scale(1.0 / w).det().sqrt()
        })
        .collect()
}

fn apply_boundary(kinds: &[VertexKind], v: &mut [[f64; 2]]) {
    for (vel, kind) in v.iter_mut().zip(kinds) {
        match kind {
            VertexKind::Interior => {}
            VertexKind::Corner => *vel = [0.0, 0.0],
            VertexKind::Boundary { tangent, .. } => {
                let s = vel[0] * tangent[0] + vel[1] * tangent[1];
                *vel = [s * tangent[0], s * tangent[1]];
            }
        }
    }
}

fn velocities_with(
    physical: &SimplicialMesh,
    fr: &Frozen,
    sd: &[f64],
    xi: &[Point],
    metric: &[SmallMat],
    tau: f64,
) -> Result<Vec<[f64; 2]>, MmpdeError> {
    let mut v = neg_gradient(physical, fr, xi, metric)?;
    for (vel, s) in v.iter_mut().zip(sd) {
        vel[0] *= s / tau;
        vel[1] *= s / tau;
    }
    apply_boundary(&physical.vertex_kinds, &mut v);
    Ok(v)
}

/// `d xi_j / dt = -(det M(x_j)^{1/2} / tau) dI_h/d xi_j`, with corners held
/// fixed and boundary vertices sliding along their edge.
pub fn nodal_velocities(
    physical: &SimplicialMesh,
    xi: &[Point],
    metric: &[SmallMat],
    tau: f64,
) -> Result<Vec<[f64; 2]>, MmpdeError> {
    check_metric(physical, metric)?;
    let fr = Frozen::new(physical)?;
    let sd = vertex_sqrt_det(physical, &fr, metric);
    velocities_with(physical, &fr, &sd, xi, metric, tau)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MmpdeTrace {
    /// Energy after each accepted substep (the first entry is the start).
    pub energies: Vec<f64>,
    pub substeps: usize,
    pub rejected: usize,
    /// Integration stopped early: the energy could not be decreased at the
    /// smallest substep (numerically at equilibrium) or the substep cap
    /// was reached.
    pub stopped_early: bool,
    /// Fraction of the computational displacement applied when mapping
    /// back (below 1 when the full displacement gave a tangled mesh).
    pub applied: f64,
}

/// Integrate the computational coordinates over an interval of length
/// `interval`, starting from `xi0`. Each substep is either explicit Euler
/// or linearly implicit Euler with the Jacobian replaced by its
/// vertex-diagonal blocks (stable for the stiff local modes that appear
/// near sharp layers; same fixed points). A substep is accepted when no
/// element shrinks below `min_area_ratio` of its area and the energy does
/// not increase; otherwise it is halved. Vertex displacements are capped
/// relative to the local mesh size (see `max_displacement`). After an accepted substep the
/// size doubles again, up to the initial size.
pub fn integrate_mmpde(
    physical: &SimplicialMesh,
    xi0: &[Point],
    metric: &[SmallMat],
    tau: f64,
    interval: f64,
    opts: &MmpdeOptions,
) -> Result<(Vec<Point>, MmpdeTrace), MmpdeError> {
    check_metric(physical, metric)?;
    let fr = Frozen::new(physical)?;
    let sd = vertex_sqrt_det(physical, &fr, metric);
    let dim = physical.dim;
    let measures = |xi: &[Point]| -> Vec<f64> {
        (0..physical.n_elements())
            .map(|k| signed_measure_of(dim, xi, physical.element(k)))
            .collect()
    };
    let mut xi = xi0.to_vec();
    let mut areas = measures(&xi);
    if let Some(k) = areas.iter().position(|a| !(*a > 0.0)) {
        return Err(MmpdeError::Degenerate {
            element: k,
            det: areas[k],
        });
    }
    let mut e = energy_with(physical, &fr, &xi, metric)?;
    let mut trace = MmpdeTrace {
        energies: vec![e],
        ..Default::default()
    };
    let h_min = interval / opts.max_substeps as f64;
    let h_max = interval / opts.initial_substeps.max(1) as f64;
    let mut h = h_max;
    let mut t = 0.0;
    // velocities, Jacobian blocks and patch altitudes at the current xi
    let mut cache: Option<(Vec<[f64; 2]>, Option<Vec<SmallMat>>, Vec<f64>)> = None;
    while interval - t > 1e-14 * interval {
        if trace.substeps >= opts.max_substeps {
            trace.stopped_early = true;
            break;
        }
        let step = h.min(interval - t);
        if cache.is_none() {
            let g = neg_gradient(physical, &fr, &xi, metric)?;
            let blocks = if opts.implicit.unwrap_or(dim == 2) {
                Some(gradient_diagonal_blocks(physical, &fr, &xi, metric, &g)?)
            } else {
                None
            };
            let mut v = g;
            for (vel, s) in v.iter_mut().zip(&sd) {
                vel[0] *= s / tau;
                vel[1] *= s / tau;
            }
            apply_boundary(&physical.vertex_kinds, &mut v);
            cache = Some((v, blocks, patch_altitudes(physical, &xi)));
        }
        let (v, blocks, alt) = cache.as_ref().expect("filled above");
        let trial: Vec<Point> = (0..xi.len())
            .map(|j| {
                let mut d = match blocks {
                    None => [step * v[j][0], step * v[j][1]],
                    Some(bl) => implicit_increment(
                        &physical.vertex_kinds[j],
                        dim,
                        &bl[j].scale(sd[j] / tau),
                        v[j],
                        step,
                    ),
                };
                // a positive rescaling per vertex keeps d a descent direction
                let cap = opts.max_displacement * alt[j] * step / h_max;
                let len = d[0].hypot(d[1]);
                if len > cap {
                    d = [d[0] * cap / len, d[1] * cap / len];
                }
                [xi[j][0] + d[0], xi[j][1] + d[1]]
            })
            .collect();
        let new_areas = measures(&trial);
        let bad = new_areas
            .iter()
            .zip(&areas)
            .position(|(a, b)| !(*a >= opts.min_area_ratio * b));
        let e_new = if bad.is_none() {
            energy_with(physical, &fr, &trial, metric)?
        } else {
            f64::INFINITY
        };
        if bad.is_none() && e_new <= e + opts.energy_tol * e.abs() {
            xi = trial;
            cache = None;
            areas = new_areas;
            e = e_new;
            t += step;
            trace.substeps += 1;
            trace.energies.push(e);
            // let the step recover after a rejection
            h = (2.0 * h).min(h_max);
            continue;
        }
        trace.rejected += 1;
        if step <= h_min * (1.0 + 1e-12) {
            if let Some(k) = bad {
                return Err(MmpdeError::Inversion {
                    element: k,
                    dt: step,
                    t,
                });
            }
            trace.stopped_early = true;
            break;
        }
        h = (0.5 * step).max(h_min);
    }
    Ok((xi, trace))
}

/// Uniform-bin point locator over the elements of a mesh given by
/// `vertices` and the connectivity of `conn`.
struct Locator<'a> {
    conn: &'a SimplicialMesh,
    vertices: &'a [Point],
    lo: [f64; 2],
    size: [f64; 2],
    nb: [usize; 2],
    bins: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    fn new(conn: &'a SimplicialMesh, vertices: &'a [Point]) -> Self {
        let dim = conn.dim;
        let n = conn.n_elements();
        let per_axis = if dim == 1 {
            n.max(1)
        } else {
            (n as f64).sqrt().ceil() as usize
        };
        let nb = [per_axis, if dim == 1 { 1 } else { per_axis }];
        let lo = conn.domain.lo;
        let size = [
            (conn.domain.hi[0] - lo[0]) / nb[0] as f64,
            if dim == 1 {
                1.0
            } else {
                (conn.domain.hi[1] - lo[1]) / nb[1] as f64
            },
        ];
        let mut loc = Locator {
            conn,
            vertices,
            lo,
            size,
            nb,
            bins: vec![Vec::new(); nb[0] * nb[1]],
        };
        for k in 0..n {
            let mut bmin = [f64::INFINITY; 2];
            let mut bmax = [f64::NEG_INFINITY; 2];
            for &v in conn.element(k) {
                for a in 0..dim {
                    bmin[a] = bmin[a].min(vertices[v][a]);
                    bmax[a] = bmax[a].max(vertices[v][a]);
                }
            }
            let (i0, j0) = loc.bin_of(bmin);
            let (i1, j1) = loc.bin_of(bmax);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    loc.bins[j * nb[0] + i].push(k);
                }
            }
        }
        loc
    }

    fn bin_of(&self, p: Point) -> (usize, usize) {
        let c = |a: usize| {
            (((p[a] - self.lo[a]) / self.size[a]).floor().max(0.0) as usize).min(self.nb[a] - 1)
        };
        (c(0), if self.conn.dim == 1 { 0 } else { c(1) })
    }

    fn barycentric(&self, k: usize, p: Point) -> [f64; 3] {
        let el = self.conn.element(k);
        let x0 = self.vertices[el[0]];
        if self.conn.dim == 1 {
            let s = (p[0] - x0[0]) / (self.vertices[el[1]][0] - x0[0]);
            return [1.0 - s, s, 0.0];
        }
        let e = edge_matrix_of(2, self.vertices, el);
        let l = e.inverse().mul_vec([p[0] - x0[0], p[1] - x0[1]]);
        [1.0 - l[0] - l[1], l[0], l[1]]
    }

    fn min_coord(&self, b: &[f64; 3]) -> f64 {
        b[..=self.conn.dim]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Containing element and barycentric coordinates; nearest element
    /// (largest minimum coordinate) as a fallback.
    fn locate(&self, p: Point) -> (usize, [f64; 3], f64) {
        let (i, j) = self.bin_of(p);
        let mut best = (usize::MAX, [0.0; 3], f64::NEG_INFINITY);
        for &k in &self.bins[j * self.nb[0] + i] {
            let b = self.barycentric(k, p);
            let m = self.min_coord(&b);
            if m > best.2 {
                best = (k, b, m);
            }
        }
        if best.2 >= -1e-12 {
            return best;
        }
        for k in 0..self.conn.n_elements() {
            let b = self.barycentric(k, p);
            let m = self.min_coord(&b);
            if m > best.2 {
                best = (k, b, m);
            }
        }
        best
    }
}

/// `T_h^{n+1} = Phi_h(T^_c)`, where `Phi_h` maps each element of the
/// computational mesh `xi` affinely onto the same element of `physical`.
pub fn new_physical_mesh(
    physical: &SimplicialMesh,
    xi: &[Point],
    reference: &SimplicialMesh,
) -> Result<SimplicialMesh, MmpdeError> {
    if !physical.same_connectivity(reference) || xi.len() != physical.n_vertices() {
        return Err(MmpdeError::ConnectivityMismatch);
    }
    let loc = Locator::new(physical, xi);
    let dim = physical.dim;
    let mut out = Vec::with_capacity(reference.n_vertices());
    for (v, p) in reference.vertices.iter().enumerate() {
        let x = match reference.vertex_kinds[v] {
            VertexKind::Corner => *p,
            kind => {
                let (k, b, m) = loc.locate(*p);
                if k == usize::MAX || m < -1e-9 {
                    return Err(MmpdeError::PointLocation {
                        vertex: v,
                        point: *p,
                    });
                }
                let el = physical.element(k);
                let mut x = [0.0; 2];
                for (a, &vert) in el.iter().enumerate() {
                    let w = b[a].clamp(0.0, 1.0);
                    for c in 0..dim {
                        x[c] += w * physical.vertices[vert][c];
                    }
                }
                let s: f64 = (0..=dim).map(|a| b[a].clamp(0.0, 1.0)).sum();
                for c in x.iter_mut().take(dim) {
                    *c /= s;
                }
                if let VertexKind::Boundary { axis, value, .. } = kind {
                    x[axis] = value;
                }
                x
            }
        };
        out.push(x);
    }
    let mesh = physical.with_vertices(out);
    mesh.validate()?;
    Ok(mesh)
}

/// One adaptation: integrate from the reference computational mesh over
/// `interval` and map back.
pub fn move_mesh(
    physical: &SimplicialMesh,
    reference: &SimplicialMesh,
    metric: &[SmallMat],
    tau: f64,
    interval: f64,
    opts: &MmpdeOptions,
) -> Result<(SimplicialMesh, MmpdeTrace), MmpdeError> {
    if !physical.same_connectivity(reference) {
        return Err(MmpdeError::ConnectivityMismatch);
    }
    let (xi, mut trace) =
        integrate_mmpde(physical, &reference.vertices, metric, tau, interval, opts)?;
    // The piecewise-linear map can tangle the image of the reference mesh
    // even when `xi` is valid. Fall back to a fraction of the displacement;
    // at zero the map is the identity and the mesh is unchanged.
    let mut s = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let blend: Vec<Point> = if s == 1.0 {
            xi.clone()
        } else {
            reference
                .vertices
                .iter()
                .zip(&xi)
                .map(|(p, q)| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])])
                .collect()
        };
        let valid = (0..physical.n_elements())
            .all(|k| signed_measure_of(physical.dim, &blend, physical.element(k)) > 0.0);
        if valid {
            if let Ok(mesh) = new_physical_mesh(physical, &blend, reference) {
                trace.applied = s;
                return Ok((mesh, trace));
            }
        }
        s *= 0.5;
    }
    log::debug!("mesh movement fell back to the unchanged mesh");
    trace.applied = 0.0;
    Ok((physical.clone(), trace))
}

const MAX_BACKTRACK: usize = 8;

/// `max_K |K| sqrt(det M_K) / min_K |K| sqrt(det M_K)`; 1 for an
/// equidistributed mesh.
pub fn equidistribution_ratio(mesh: &SimplicialMesh, metric: &[SmallMat]) -> f64 {
    let q: Vec<f64> = (0..mesh.n_elements())
        .map(|k| mesh.signed_measure(k) * metric[k].det().sqrt())
        .collect();
    q.iter().cloned().fold(0.0, f64::max) / q.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use proptest::prelude::*;

    fn square(n: usize) -> SimplicialMesh {
        SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 1.0), n).unwrap()
    }

    fn perturbed(mesh: &SimplicialMesh, amp: f64, seed: u64) -> SimplicialMesh {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let h = 1.0 / (mesh.n_elements() as f64 / 2.0).sqrt();
        let v = mesh
            .vertices
            .iter()
            .zip(&mesh.vertex_kinds)
            .map(|(p, kind)| match kind {
                VertexKind::Interior => [
                    p[0] + amp * h * rng.gen_range(-1.0..1.0),
                    p[1] + amp * h * rng.gen_range(-1.0..1.0),
                ],
                VertexKind::Boundary { tangent, .. } => {
                    let s = amp * h * rng.gen_range(-1.0..1.0);
                    [p[0] + s * tangent[0], p[1] + s * tangent[1]]
                }
                VertexKind::Corner => *p,
            })
            .collect();
        mesh.with_vertices(v)
    }

    /// Straight summation of the functional with explicit 2x2 algebra.
    fn energy_oracle(phys: &SimplicialMesh, xi: &[Point], metric: &[SmallMat]) -> f64 {
        let mut total = 0.0;
        for k in 0..phys.n_elements() {
            let el = phys.element(k);
            let (p0, p1, p2) = (
                phys.vertices[el[0]],
                phys.vertices[el[1]],
                phys.vertices[el[2]],
            );
            let (q0, q1, q2) = (xi[el[0]], xi[el[1]], xi[el[2]]);
            let e = [
                [p1[0] - p0[0], p2[0] - p0[0]],
                [p1[1] - p0[1], p2[1] - p0[1]],
            ];
            let ec = [
                [q1[0] - q0[0], q2[0] - q0[0]],
                [q1[1] - q0[1], q2[1] - q0[1]],
            ];
            let de = e[0][0] * e[1][1] - e[0][1] * e[1][0];
            let ei = [[e[1][1] / de, -e[0][1] / de], [-e[1][0] / de, e[0][0] / de]];
            let mut j = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    for s in 0..2 {
                        j[r][c] += ec[r][s] * ei[s][c];
                    }
                }
            }
            let m = metric[k].a;
            let dm = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let mi = [[m[1][1] / dm, -m[0][1] / dm], [-m[1][0] / dm, m[0][0] / dm]];
            let mut tr = 0.0;
            for r in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        tr += j[r][s] * mi[s][t] * j[r][t];
                    }
                }
            }
            let dj = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let area = 0.5 * de;
            total += area * (dm.sqrt() * tr * tr / 3.0 + 4.0 / 3.0 * dm.sqrt() * dj * dj / dm);
        }
        total
    }

    fn random_metric(n: usize, seed: u64) -> Vec<SmallMat> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let th: f64 = rng.gen_range(0.0..3.14);
                let q = SmallMat::from_rows([th.cos(), -th.sin()], [th.sin(), th.cos()]);
                SmallMat::from_eigen([rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0)], &q)
            })
            .collect()
    }

    #[test]
    fn identity_energy() {
        let m = square(4);
        let metric = vec![SmallMat::identity(2); m.n_elements()];
        let e = energy(&m, &m.vertices, &metric).unwrap();
        assert!((e - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn energy_scaling() {
        let m = square(3);
        let metric = vec![SmallMat::identity(2); m.n_elements()];
        for s in [0.5, 2.0] {
            let xi: Vec<Point> = m.vertices.iter().map(|p| [s * p[0], s * p[1]]).collect();
            let e = energy(&m, &xi, &metric).unwrap();
            // tr(J J^T) = 2 s^2, det J = s^2
            let expect = (4.0 * s.powi(4)) / 3.0 + 4.0 / 3.0 * s.powi(4);
            assert!((e - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn energy_matches_oracle_on_random_pairs() {
        for seed in 0..5 {
            let phys = perturbed(&square(5), 0.2, seed);
            let comp = perturbed(&square(5), 0.2, seed + 100);
            let metric = random_metric(phys.n_elements(), seed);
            let e = energy(&phys, &comp.vertices, &metric).unwrap();
            let o = energy_oracle(&phys, &comp.vertices, &metric);
            assert!((e - o).abs() <= 1e-12 * o.abs());
        }
    }

    #[test]
    fn derivative_examples() {
        let i = SmallMat::identity(2);
        let (dj, dd) = g_derivatives(&i, 1.0, &i);
        assert!(dj.max_abs_diff(&i.scale(8.0 / 3.0)) < 1e-14);
        assert!((dd - 8.0 / 3.0).abs() < 1e-14);
        let (dj, _) = g_derivatives(&i, 1.0, &SmallMat::diag2(4.0, 1.0));
        assert!(dj.max_abs_diff(&SmallMat::diag2(0.25, 1.0).scale(10.0 / 3.0)) < 1e-14);
    }

    fn mat() -> impl Strategy<Value = SmallMat> {
        (0.3f64..2.0, -0.5f64..0.5, -0.5f64..0.5, 0.3f64..2.0)
            .prop_map(|(a, b, c, d)| SmallMat::from_rows([a, b], [c, d]))
    }

    fn spd() -> impl Strategy<Value = SmallMat> {
        (0.0..std::f64::consts::PI, 0.2f64..5.0, 0.2f64..5.0).prop_map(|(th, a, b)| {
            let q = SmallMat::from_rows([th.cos(), -th.sin()], [th.sin(), th.cos()]);
            SmallMat::from_eigen([a, b], &q)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn derivatives_match_finite_differences(j in mat(), dj in 0.2f64..3.0, m in spd()) {
            let h = 1e-6;
            let (d, dd) = g_derivatives(&j, dj, &m);
            for r in 0..2 {
                for c in 0..2 {
                    let mut jp = j;
                    let mut jm = j;
                    jp.a[r][c] += h;
                    jm.a[r][c] -= h;
                    let fd = (g_value(&jp, dj, &m) - g_value(&jm, dj, &m)) / (2.0 * h);
                    let scale = d.a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
                    // transposed layout
                    prop_assert!((fd - d.a[c][r]).abs() <= 1e-6 * scale, "{fd} vs {}", d.a[c][r]);
                }
            }
            let fd = (g_value(&j, dj + h, &m) - g_value(&j, dj - h, &m)) / (2.0 * h);
            prop_assert!((fd - dd).abs() <= 1e-6 * dd.abs());
        }
    }

    #[test]
    fn velocities_are_scaled_negative_gradient() {
        let phys = perturbed(&square(5), 0.2, 7);
        let comp = perturbed(&square(5), 0.2, 8);
        let metric = random_metric(phys.n_elements(), 3);
        let tau = 0.1;
        let v = nodal_velocities(&phys, &comp.vertices, &metric, tau).unwrap();
        let fr = Frozen::new(&phys).unwrap();
        let sd = vertex_sqrt_det(&phys, &fr, &metric);
        let h = 1e-6;
        for (j, kind) in phys.vertex_kinds.iter().enumerate() {
            if *kind != VertexKind::Interior {
                continue;
            }
            for c in 0..2 {
                let mut xp = comp.vertices.clone();
                let mut xm = comp.vertices.clone();
                xp[j][c] += h;
                xm[j][c] -= h;
                let g = (energy(&phys, &xp, &metric).unwrap()
                    - energy(&phys, &xm, &metric).unwrap())
                    / (2.0 * h);
                let expect = -sd[j] / tau * g;
                let scale = v[j][0].abs().max(v[j][1].abs()).max(1e-3);
                assert!(
                    (v[j][c] - expect).abs() <= 1e-5 * scale,
                    "vertex {j}: {} vs {expect}",
                    v[j][c]
                );
            }
        }
    }

    #[test]
    fn uniform_identity_is_equilibrium() {
        let m = square(6);
        let metric = vec![SmallMat::identity(2); m.n_elements()];
        let v = nodal_velocities(&m, &m.vertices, &metric, 0.1).unwrap();
        for w in &v {
            assert!(
                w[0].abs() <= 1e-10 / 0.1 && w[1].abs() <= 1e-10 / 0.1,
                "{w:?}"
            );
        }
        let (xi, _) = integrate_mmpde(
            &m,
            &m.vertices,
            &metric,
            0.1,
            1e-3,
            &MmpdeOptions::default(),
        )
        .unwrap();
        for (a, b) in xi.iter().zip(&m.vertices) {
            assert!((a[0] - b[0]).abs() <= 1e-8 / 6.0 && (a[1] - b[1]).abs() <= 1e-8 / 6.0);
        }
    }

    #[test]
    fn boundary_velocity_is_tangential() {
        let phys = perturbed(&square(5), 0.2, 1);
        let metric = random_metric(phys.n_elements(), 2);
        let v = nodal_velocities(&phys, &square(5).vertices, &metric, 0.01).unwrap();
        for (w, kind) in v.iter().zip(&phys.vertex_kinds) {
            match kind {
                VertexKind::Boundary { axis, .. } => assert_eq!(w[*axis], 0.0),
                VertexKind::Corner => assert_eq!(*w, [0.0, 0.0]),
                VertexKind::Interior => {}
            }
        }
    }

    #[test]
    fn energy_decreases_along_substeps() {
        let phys = square(8);
        // strong refinement request along x = 0.5
        let metric: Vec<SmallMat> = (0..phys.n_elements())
            .map(|k| {
                let c = phys.centroid(k);
                SmallMat::diag2(1.0 + 50.0 * (-(c[0] - 0.5).powi(2) / 0.01).exp(), 1.0)
            })
            .collect();
        let (xi, trace) = integrate_mmpde(
            &phys,
            &phys.vertices,
            &metric,
            0.01,
            1e-3,
            &MmpdeOptions::default(),
        )
        .unwrap();
        assert!(trace.energies.len() >= 2);
        for w in trace.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        assert!(trace.energies.last().unwrap() < &trace.energies[0]);
        let new = new_physical_mesh(&phys, &xi, &phys).unwrap();
        new.validate().unwrap();
        // elements near the line shrink
        let near = (0..new.n_elements()).filter(|&k| (phys.centroid(k)[0] - 0.5).abs() < 0.07);
        let mean_near: f64 =
            near.clone().map(|k| new.signed_measure(k)).sum::<f64>() / near.count() as f64;
        assert!(mean_near < phys.signed_measure(0));
    }

    #[test]
    fn identity_correspondence() {
        let phys = perturbed(&square(4), 0.2, 5);
        let refm = square(4);
        let new = new_physical_mesh(&phys, &refm.vertices, &refm).unwrap();
        for (a, b) in new.vertices.iter().zip(&phys.vertices) {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn one_dimensional_three_vertex_map() {
        let dom = Domain::interval(0.0, 1.0);
        let phys = SimplicialMesh::build_uniform(dom, 2).unwrap();
        let xi = vec![[0.0, 0.0], [0.25, 0.0], [1.0, 0.0]];
        let new = new_physical_mesh(&phys, &xi, &phys).unwrap();
        assert!((new.vertices[1][0] - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(new.vertices[0][0], 0.0);
        assert_eq!(new.vertices[2][0], 1.0);
    }

    #[test]
    fn boundary_vertices_stay_on_boundary() {
        let phys = perturbed(&square(6), 0.25, 11);
        let comp = perturbed(&square(6), 0.25, 12);
        let new = new_physical_mesh(&phys, &comp.vertices, &square(6)).unwrap();
        for (p, kind) in new.vertices.iter().zip(&new.vertex_kinds) {
            if let VertexKind::Boundary { axis, value, .. } = kind {
                assert!((p[*axis] - value).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_flow_equidistributes() {
        let dom = Domain::interval(0.0, 1.0);
        let mut phys = SimplicialMesh::build_uniform(dom, 40).unwrap();
        let refm = phys.clone();
        let density = |x: f64| 1.0 + 30.0 * (-(x - 0.5).powi(2) / 0.002).exp();
        let metric_of = |m: &SimplicialMesh| -> Vec<SmallMat> {
            (0..m.n_elements())
                .map(|k| SmallMat::scalar(density(m.centroid(k)[0]).powi(2)))
                .collect()
        };
        let r0 = equidistribution_ratio(&phys, &metric_of(&phys));
        for _ in 0..10 {
            let metric = metric_of(&phys);
            phys = move_mesh(&phys, &refm, &metric, 0.01, 0.01, &MmpdeOptions::default())
                .unwrap()
                .0;
        }
        let r1 = equidistribution_ratio(&phys, &metric_of(&phys));
        assert!(r1 < 0.5 * r0, "{r0} -> {r1}");
    }

    #[test]
    fn inverted_start_rejected() {
        let m = square(2);
        let mut xi = m.vertices.clone();
        xi.swap(0, 1);
        let metric = vec![SmallMat::identity(2); m.n_elements()];
        assert!(integrate_mmpde(&m, &xi, &metric, 0.1, 1e-3, &MmpdeOptions::default()).is_err());
    }
}
