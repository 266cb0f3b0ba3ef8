//! Per-step element operators on the mesh at `t_{n+1}` and the local
//! system of the backward-Euler ALE weak form.

use super::field::map_to_physical;
use super::reference::{barycentric, ReferenceElement};
use crate::angular::Direction;
use crate::mesh::{Point, SimplicialMesh};

/// Neighbour across a face, with the relative orientation of the shared
/// face's quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceLink {
    pub element: usize,
    pub face: usize,
    pub reversed: bool,
}

#[derive(Debug, Clone)]
pub struct FaceOp {
    pub normal: [f64; 2],
    pub length: f64,
    pub neighbor: Option<FaceLink>,
}

/// How inflow and outflow parts of an element boundary are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeClassification {
    /// Sign of `Omega . n`, constant per edge.
    Simple,
    /// Sign of `(Omega - Pi_1 / c) . n` at each edge quadrature node.
    VelocityCorrected,
}

/// Inflow/outflow status of one face for one direction.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceClass {
    Inflow,
    Outflow,
    /// Per-node status (`true` = outflow), only with velocity correction.
    PerNode(Vec<bool>),
}

/// Geometry-dependent operators, built once per mesh pair.
#[derive(Debug, Clone)]
pub struct StepOperators {
    pub dim: usize,
    pub l: usize,
    pub nf: usize,
    pub nq_face: usize,
    pub n_el: usize,
    pub measure: Vec<f64>,
    /// `gx[k][i][j] = int_K d(phi_i)/dx phi_j`, flattened.
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    /// `int_K sigma_t phi_i phi_j`.
    pub sig_mass: Vec<f64>,
    pub faces: Vec<FaceOp>,
    pub moving: bool,
    /// `(1/c) int_K div(phi_i Pi_1) phi_j`.
    pub vel_vol: Vec<f64>,
    /// `(1/c) int_f (Pi_1 . n) phi_i phi_j` per face slot.
    pub vel_self: Vec<f64>,
    /// `(1/c) int_f (Pi_1 . n) phi_i phi_j^{nb}` per interior face slot.
    pub vel_cpl: Vec<f64>,
    /// `Pi_1 . n / c` at each face node, per face slot.
    pub pin: Vec<f64>,
    /// `1 / (c dt)`.
    pub inv_c_dt: f64,
}

/// Mesh velocity interpolant `Pi_1` on element `k` at reference point `xi`.
pub fn pi1(mesh: &SimplicialMesh, velocities: &[[f64; 2]], k: usize, xi: [f64; 2]) -> [f64; 2] {
    let lam = barycentric(mesh.dim, xi);
    let mut v = [0.0, 0.0];
    for (a, &node) in mesh.element(k).iter().enumerate() {
        v[0] += lam[a] * velocities[node][0];
        v[1] += lam[a] * velocities[node][1];
    }
    v
}

fn face_links(mesh: &SimplicialMesh) -> Vec<FaceOp> {
    let nf = mesh.dim + 1;
    let mut out = Vec::with_capacity(mesh.n_elements() * nf);
    for k in 0..mesh.n_elements() {
        for f in 0..nf {
            let (normal, length) = mesh.face_normal(k, f);
            let neighbor = mesh.neighbor(k, f).map(|nb| {
                let mine = mesh.face_vertices(k, f);
                let theirs = mesh.face_vertices(nb.element, nb.face);
                FaceLink {
                    element: nb.element,
                    face: nb.face,
                    reversed: mesh.dim == 2 && mine[0] != theirs[0],
                }
            });
            out.push(FaceOp {
                normal,
                length,
                neighbor,
            });
        }
    }
    out
}

impl StepOperators {
    /// Build operators on `mesh` (the mesh at `t_{n+1}`) with vertex
    /// velocities `velocities` (all zero, or `None`, on a fixed mesh).
    pub fn new(
        mesh: &SimplicialMesh,
        velocities: Option<&[[f64; 2]]>,
        re: &ReferenceElement,
        sigma_t: &dyn Fn(Point) -> f64,
        c: f64,
        dt: f64,
    ) -> Self {
        let dim = mesh.dim;
        let l = re.n_modes;
        let nf = dim + 1;
        let n_el = mesh.n_elements();
        let nq = re.volume.len();
        let nqf = re.face_rule.len();
        let moving = velocities.is_some_and(|v| v.iter().any(|u| u[0] != 0.0 || u[1] != 0.0));
        let ll = l * l;
        let mut ops = StepOperators {
            dim,
            l,
            nf,
            nq_face: nqf,
            n_el,
            measure: vec![0.0; n_el],
            gx: vec![0.0; n_el * ll],
            gy: vec![0.0; n_el * ll],
            sig_mass: vec![0.0; n_el * ll],
            faces: face_links(mesh),
            moving,
            vel_vol: if moving {
                vec![0.0; n_el * ll]
            } else {
                Vec::new()
            },
            vel_self: if moving {
                vec![0.0; n_el * nf * ll]
            } else {
                Vec::new()
            },
            vel_cpl: if moving {
                vec![0.0; n_el * nf * ll]
            } else {
                Vec::new()
            },
            pin: vec![0.0; n_el * nf * nqf],
            inv_c_dt: 1.0 / (c * dt),
        };
        let inv_c = 1.0 / c;
        let mut grad = vec![[0.0; 2]; nq * l];
        for k in 0..n_el {
            let e = mesh.edge_matrix(k);
            let area = mesh.signed_measure(k);
            ops.measure[k] = area;
            let einv_t = e.inverse().transpose();
            for q in 0..nq {
                for p in 0..l {
                    grad[q * l + p] = einv_t.mul_vec(re.vol_dphi[q * l + p]);
                }
            }
            let gx = &mut ops.gx[k * ll..(k + 1) * ll];
            let gy = &mut ops.gy[k * ll..(k + 1) * ll];
            let sm = &mut ops.sig_mass[k * ll..(k + 1) * ll];
            for q in 0..nq {
                let w = area * re.volume.weights[q];
                let st = sigma_t(map_to_physical(mesh, k, re.volume.points[q]));
                for i in 0..l {
                    let gi = grad[q * l + i];
                    for j in 0..l {
                        let pj = re.vol_phi[q * l + j];
                        gx[i * l + j] += w * gi[0] * pj;
                        gy[i * l + j] += w * gi[1] * pj;
                        sm[i * l + j] += w * st * re.vol_phi[q * l + i] * pj;
                    }
                }
            }
            let vel = match velocities {
                Some(v) if moving => v,
                _ => continue,
            };
            // div(Pi_1) is constant on the element.
            let el = mesh.element(k);
            let div = match dim {
                1 => (vel[el[1]][0] - vel[el[0]][0]) / e.a[0][0],
                _ => {
                    let vm = crate::linalg::SmallMat::from_rows(
                        [vel[el[1]][0] - vel[el[0]][0], vel[el[2]][0] - vel[el[0]][0]],
                        [vel[el[1]][1] - vel[el[0]][1], vel[el[2]][1] - vel[el[0]][1]],
                    );
                    vm.mul(&e.inverse()).trace()
                }
            };
            let vv = &mut ops.vel_vol[k * ll..(k + 1) * ll];
            for q in 0..nq {
                let w = area * re.volume.weights[q] * inv_c;
                let pv = pi1(mesh, vel, k, re.volume.points[q]);
                for i in 0..l {
                    let gi = grad[q * l + i];
                    let di = gi[0] * pv[0] + gi[1] * pv[1] + re.vol_phi[q * l + i] * div;
                    for j in 0..l {
                        vv[i * l + j] += w * di * re.vol_phi[q * l + j];
                    }
                }
            }
        }
        if let Some(vel) = velocities {
            for k in 0..n_el {
                for f in 0..nf {
                    let slot = k * nf + f;
                    let fo = ops.faces[slot].clone();
                    for q in 0..nqf {
                        let pv = pi1(mesh, vel, k, re.face_points[f][q]);
                        ops.pin[slot * nqf + q] =
                            (pv[0] * fo.normal[0] + pv[1] * fo.normal[1]) * inv_c;
                    }
                    if !moving {
                        continue;
                    }
                    let vs = &mut ops.vel_self[slot * ll..(slot + 1) * ll];
                    for q in 0..nqf {
                        let w = fo.length * re.face_rule.weights[q] * ops.pin[slot * nqf + q];
                        for i in 0..l {
                            for j in 0..l {
                                vs[i * l + j] +=
                                    w * re.face_phi[f][q * l + i] * re.face_phi[f][q * l + j];
                            }
                        }
                    }
                    if let Some(nb) = fo.neighbor {
                        let vc = &mut ops.vel_cpl[slot * ll..(slot + 1) * ll];
                        for q in 0..nqf {
                            let qn = if nb.reversed { nqf - 1 - q } else { q };
                            let w = fo.length * re.face_rule.weights[q] * ops.pin[slot * nqf + q];
                            for i in 0..l {
                                for j in 0..l {
                                    vc[i * l + j] += w
                                        * re.face_phi[f][q * l + i]
                                        * re.face_phi[nb.face][qn * l + j];
                                }
                            }
                        }
                    }
                }
            }
        }
        ops
    }

    /// Inflow/outflow status of face `f` of element `k` for direction `dir`.
    pub fn classify(
        &self,
        k: usize,
        f: usize,
        dir: &Direction,
        mode: EdgeClassification,
    ) -> FaceClass {
        let slot = k * self.nf + f;
        let on = dir.dot(self.faces[slot].normal);
        match mode {
            EdgeClassification::Simple => {
                if on >= 0.0 {
                    FaceClass::Outflow
                } else {
                    FaceClass::Inflow
                }
            }
            EdgeClassification::VelocityCorrected => {
                let nodes: Vec<bool> = (0..self.nq_face)
                    .map(|q| on - self.pin[slot * self.nq_face + q] >= 0.0)
                    .collect();
                if nodes.iter().all(|&b| b) {
                    FaceClass::Outflow
                } else if nodes.iter().all(|&b| !b) {
                    FaceClass::Inflow
                } else {
                    FaceClass::PerNode(nodes)
                }
            }
        }
    }
}

/// Partition of every element's faces for one direction.
pub fn classify_edges(
    ops: &StepOperators,
    dir: &Direction,
    mode: EdgeClassification,
) -> Vec<FaceClass> {
    (0..ops.n_el)
        .flat_map(|k| (0..ops.nf).map(move |f| (k, f)))
        .map(|(k, f)| ops.classify(k, f, dir, mode))
        .collect()
}

/// Everything direction-specific needed to assemble one local system.
pub struct LocalInputs<'a> {
    pub dir: &'a Direction,
    /// Current coefficients of this direction (all elements).
    pub current: &'a [f64],
    /// Coefficients at `t_n` for this element.
    pub old: &'a [f64],
    /// `sigma_s * Psi*_K` modal moments for this element (already scaled
    /// by `sigma_s`; multiplied by `|K|` here).
    pub scatter: &'a [f64],
    /// `int_K q phi_i` for this element.
    pub source: &'a [f64],
    /// Boundary data at the nodes of each boundary face of this element
    /// (indexed by local face; `None` for interior faces).
    pub boundary: [Option<&'a [f64]>; 3],
}

/// Assemble the `L x L` system `A x = b` for element `k`.
pub fn assemble_local(
    ops: &StepOperators,
    re: &ReferenceElement,
    k: usize,
    inp: &LocalInputs<'_>,
    mode: EdgeClassification,
    a: &mut [f64],
    b: &mut [f64],
) {
    let l = ops.l;
    let ll = l * l;
    let area = ops.measure[k];
    let (ox, oy) = (inp.dir.omega[0], inp.dir.omega[1]);
    let tcoef = area * ops.inv_c_dt;
    let gx = &ops.gx[k * ll..(k + 1) * ll];
    let gy = &ops.gy[k * ll..(k + 1) * ll];
    let sm = &ops.sig_mass[k * ll..(k + 1) * ll];
    for i in 0..l {
        for j in 0..l {
            a[i * l + j] = sm[i * l + j] - ox * gx[i * l + j] - oy * gy[i * l + j];
        }
        a[i * l + i] += tcoef;
        b[i] = tcoef * inp.old[i] + area * inp.scatter[i] + inp.source[i];
    }
    if ops.moving {
        let vv = &ops.vel_vol[k * ll..(k + 1) * ll];
        for (x, v) in a[..ll].iter_mut().zip(vv) {
            *x += v;
        }
    }
    let nqf = ops.nq_face;
    for f in 0..ops.nf {
        let slot = k * ops.nf + f;
        let fo = &ops.faces[slot];
        let on = inp.dir.dot(fo.normal);
        let class = match mode {
            EdgeClassification::Simple => {
                if on >= 0.0 {
                    FaceClass::Outflow
                } else {
                    FaceClass::Inflow
                }
            }
            _ => ops.classify(k, f, inp.dir, mode),
        };
        match class {
            FaceClass::Outflow => {
                let fs = &re.face_self[f];
                let s = on * fo.length;
                for x in 0..ll {
                    a[x] += s * fs[x];
                }
                if ops.moving {
                    for (x, v) in a[..ll]
                        .iter_mut()
                        .zip(&ops.vel_self[slot * ll..(slot + 1) * ll])
                    {
                        *x -= v;
                    }
                }
            }
            FaceClass::Inflow => match fo.neighbor {
                Some(nb) => {
                    let ext = &inp.current[nb.element * l..(nb.element + 1) * l];
                    let cp = re.cpl(f, nb.face, nb.reversed);
                    let s = on * fo.length;
                    for i in 0..l {
                        let mut acc = 0.0;
                        for j in 0..l {
                            acc += s * cp[i * l + j] * ext[j];
                        }
                        if ops.moving {
                            let vc = &ops.vel_cpl[slot * ll..(slot + 1) * ll];
                            for j in 0..l {
                                acc -= vc[i * l + j] * ext[j];
                            }
                        }
                        b[i] -= acc;
                    }
                }
                None => {
                    let g = inp.boundary[f].expect("boundary data on inflow face");
                    for q in 0..nqf {
                        let w = fo.length
                            * re.face_rule.weights[q]
                            * (on - ops.pin[slot * nqf + q])
                            * g[q];
                        for i in 0..l {
                            b[i] -= w * re.face_phi[f][q * l + i];
                        }
                    }
                }
            },
            FaceClass::PerNode(outflow) => {
                for q in 0..nqf {
                    let w = fo.length * re.face_rule.weights[q] * (on - ops.pin[slot * nqf + q]);
                    let phi = &re.face_phi[f][q * l..(q + 1) * l];
                    if outflow[q] {
                        for i in 0..l {
                            for j in 0..l {
                                a[i * l + j] += w * phi[i] * phi[j];
                            }
                        }
                    } else {
                        let ext_val = match fo.neighbor {
                            Some(nb) => {
                                let qn = if nb.reversed { nqf - 1 - q } else { q };
                                let ext = &inp.current[nb.element * l..(nb.element + 1) * l];
                                let pn = &re.face_phi[nb.face][qn * l..(qn + 1) * l];
                                ext.iter().zip(pn).map(|(c, p)| c * p).sum::<f64>()
                            }
                            None => inp.boundary[f].expect("boundary data on inflow face")[q],
                        };
                        for i in 0..l {
                            b[i] -= w * ext_val * phi[i];
                        }
                    }
                }
            }
        }
    }
}
