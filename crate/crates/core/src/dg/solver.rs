//! Backward-Euler step with source iteration.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{map_to_physical, DGField};
use super::ops::{assemble_local, EdgeClassification, LocalInputs, StepOperators};
use super::reference::ReferenceElement;
use super::sweep::{sweep_order, SweepKind, SweepOrder};
use super::SolveError;
use crate::angular::AngularQuadrature;
use crate::linalg::solve_dense;
use crate::mesh::{Point, SimplicialMesh};
use crate::problems::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Start from the coefficients at `t_n`.
    Previous,
    /// Start from `2 I^n - I^{n-1}` when the earlier level is available.
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Abort when the delta grows this many iterations in a row.
    pub divergence_window: usize,
    pub sweep: SweepKind,
    pub classification: EdgeClassification,
    /// Jacobi over directions (scattering source frozen per iteration),
    /// directions solved concurrently.
    pub parallel: bool,
    pub initial_guess: InitialGuess,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 200,
            divergence_window: 5,
            sweep: SweepKind::Centroid,
            classification: EdgeClassification::Simple,
            parallel: false,
            initial_guess: InitialGuess::Previous,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepReport {
    /// Source iterations performed.
    pub iterations: usize,
    /// `max_m |I^{l+1}_m - I^l_m|_inf` per iteration.
    pub deltas: Vec<f64>,
    /// Upwind dependencies not respected by the sweep orders (all
    /// directions).
    pub sweep_violations: usize,
}

/// Mesh-dependent data for a step: operators, sweep orders and the
/// quadrature nodes where problem data is sampled.
#[derive(Debug, Clone)]
pub struct StepPlan {
    pub ops: StepOperators,
    pub orders: Vec<SweepOrder>,
    /// Boundary-face index per face slot (`usize::MAX` for interior faces).
    pub bslot: Vec<usize>,
    pub n_bfaces: usize,
    /// Volume nodes `[k * nq + q]`.
    pub qpoints: Vec<Point>,
    /// Boundary face nodes `[b * nq_face + q]`.
    pub bpoints: Vec<Point>,
    pub mesh: Arc<SimplicialMesh>,
}

impl StepPlan {
    pub fn new(
        mesh: Arc<SimplicialMesh>,
        velocities: Option<&[[f64; 2]]>,
        re: &ReferenceElement,
        problem: &ProblemSpec,
        quad: &AngularQuadrature,
        dt: f64,
        sweep: SweepKind,
    ) -> Self {
        let ops = StepOperators::new(
            &mesh,
            velocities,
            re,
            &|x| problem.sigma_t(x),
            problem.c,
            dt,
        );
        let orders = quad
            .directions
            .iter()
            .map(|d| sweep_order(&mesh, d, sweep))
            .collect();
        let nf = mesh.dim + 1;
        let mut bslot = vec![usize::MAX; mesh.n_elements() * nf];
        let mut bpoints = Vec::new();
        let mut n_bfaces = 0;
        for k in 0..mesh.n_elements() {
            for f in 0..nf {
                if mesh.neighbor(k, f).is_none() {
                    bslot[k * nf + f] = n_bfaces;
                    n_bfaces += 1;
                    for xi in &re.face_points[f] {
                        bpoints.push(map_to_physical(&mesh, k, *xi));
                    }
                }
            }
        }
        let qpoints = (0..mesh.n_elements())
            .flat_map(|k| re.volume.points.iter().map(move |xi| (k, *xi)))
            .map(|(k, xi)| map_to_physical(&mesh, k, xi))
            .collect();
        StepPlan {
            ops,
            orders,
            bslot,
            n_bfaces,
            qpoints,
            bpoints,
            mesh,
        }
    }

    pub fn violations(&self) -> usize {
        self.orders.iter().map(|o| o.violations).sum()
    }
}

/// Problem data sampled at `t_{n+1}`.
struct StepData {
    /// `int_K q_m phi_p`, `[(m * N + k) * L + p]`.
    source: Vec<f64>,
    /// Boundary values `[(m * n_bfaces + b) * nq_face + q]` (NaN where the
    /// face is outflow).
    boundary: Vec<f64>,
}

fn sample_data(
    plan: &StepPlan,
    re: &ReferenceElement,
    problem: &ProblemSpec,
    quad: &AngularQuadrature,
    t: f64,
) -> Result<StepData, SolveError> {
    let ops = &plan.ops;
    let (n, l, nq) = (ops.n_el, ops.l, re.volume.len());
    let na = quad.len();
    let mut source = vec![0.0; na * n * l];
    source
        .par_chunks_mut(n * l)
        .enumerate()
        .for_each(|(m, chunk)| {
            let dir = &quad.directions[m];
            for k in 0..n {
                let area = ops.measure[k];
                let c = &mut chunk[k * l..(k + 1) * l];
                for q in 0..nq {
                    let v = area
                        * re.volume.weights[q]
                        * problem.source(plan.qpoints[k * nq + q], dir, t);
                    for p in 0..l {
                        c[p] += v * re.vol_phi[q * l + p];
                    }
                }
            }
        });
    let nqf = ops.nq_face;
    let nb = plan.n_bfaces;
    let mut boundary = vec![f64::NAN; na * nb * nqf];
    for (m, dir) in quad.directions.iter().enumerate() {
        for k in 0..n {
            for f in 0..ops.nf {
                let slot = k * ops.nf + f;
                let b = plan.bslot[slot];
                if b == usize::MAX || dir.dot(ops.faces[slot].normal) >= 0.0 {
                    continue;
                }
                for q in 0..nqf {
                    let x = plan.bpoints[b * nqf + q];
                    let g = problem
                        .boundary(x, dir, t)
                        .ok_or(SolveError::MissingBoundary {
                            point: x,
                            direction: m,
                        })?;
                    boundary[(m * nb + b) * nqf + q] = g;
                }
            }
        }
    }
    Ok(StepData { source, boundary })
}

struct SweepContext<'a> {
    plan: &'a StepPlan,
    re: &'a ReferenceElement,
    quad: &'a AngularQuadrature,
    data: &'a StepData,
    old: &'a [f64],
    sigma_s: f64,
    classification: EdgeClassification,
}

impl SweepContext<'_> {
    /// Sweep direction `m` over all elements, updating `cur` (this
    /// direction's coefficients) in place. `psi` supplies the scattering
    /// moments; when `psi_update` is set the running angular sum is kept
    /// current (Gauss-Seidel in angle). Returns the sup-norm change.
    fn sweep_direction(
        &self,
        m: usize,
        cur: &mut [f64],
        psi: &mut PsiAccess<'_>,
    ) -> Result<f64, SolveError> {
        let ops = &self.plan.ops;
        let (n, l, nf, nqf) = (ops.n_el, ops.l, ops.nf, ops.nq_face);
        let dir = &self.quad.directions[m];
        let w = self.quad.weights[m];
        let nb = self.plan.n_bfaces;
        let mut a = [0.0; 36];
        let mut b = [0.0; 6];
        let mut scatter = [0.0; 6];
        let mut delta: f64 = 0.0;
        for &k in &self.plan.orders[m].order {
            let ps = psi.get(k, l);
            for p in 0..l {
                scatter[p] = self.sigma_s * ps[p];
            }
            let mut boundary: [Option<&[f64]>; 3] = [None; 3];
            for f in 0..nf {
                let bs = self.plan.bslot[k * nf + f];
                if bs != usize::MAX {
                    let off = (m * nb + bs) * nqf;
                    boundary[f] = Some(&self.data.boundary[off..off + nqf]);
                }
            }
            let base = (m * n + k) * l;
            let inp = LocalInputs {
                dir,
                current: cur,
                old: &self.old[base..base + l],
                scatter: &scatter[..l],
                source: &self.data.source[base..base + l],
                boundary,
            };
            assemble_local(ops, self.re, k, &inp, self.classification, &mut a, &mut b);
            if !solve_dense(&mut a, &mut b, l) {
                return Err(SolveError::Singular {
                    element: k,
                    direction: m,
                });
            }
            if b[..l].iter().any(|v| !v.is_finite()) {
                return Err(SolveError::NonFinite {
                    element: k,
                    direction: m,
                });
            }
            let c = &mut cur[k * l..(k + 1) * l];
            for p in 0..l {
                let d = b[p] - c[p];
                delta = delta.max(d.abs());
                psi.add(k * l + p, w * d);
                c[p] = b[p];
            }
        }
        Ok(delta)
    }
}

/// Scattering moments: live (Gauss-Seidel) or frozen (Jacobi).
enum PsiAccess<'a> {
    Live(&'a mut [f64]),
    Frozen(&'a [f64]),
}

impl PsiAccess<'_> {
    #[inline]
    fn get(&self, k: usize, l: usize) -> &[f64] {
        match self {
            PsiAccess::Live(p) => &p[k * l..(k + 1) * l],
            PsiAccess::Frozen(p) => &p[k * l..(k + 1) * l],
        }
    }

    #[inline]
    fn add(&mut self, i: usize, v: f64) {
        if let PsiAccess::Live(p) = self {
            p[i] += v;
        }
    }
}

fn angular_sum(coeffs: &[f64], weights: &[f64], stride: usize) -> Vec<f64> {
    let mut psi = vec![0.0; stride];
    for (m, w) in weights.iter().enumerate() {
        for (o, c) in psi.iter_mut().zip(&coeffs[m * stride..(m + 1) * stride]) {
            *o += w * c;
        }
    }
    psi
}

/// One source iteration over all directions. Returns the per-direction
/// sup-norm changes.
fn source_iteration_step(
    ctx: &SweepContext<'_>,
    coeffs: &mut [f64],
    parallel: bool,
) -> Result<Vec<f64>, SolveError> {
    let stride = ctx.plan.ops.n_el * ctx.plan.ops.l;
    let mut psi = angular_sum(coeffs, &ctx.quad.weights, stride);
    if parallel {
        let frozen = psi;
        coeffs
            .par_chunks_mut(stride)
            .enumerate()
            .map(|(m, cur)| ctx.sweep_direction(m, cur, &mut PsiAccess::Frozen(&frozen)))
            .collect()
    } else {
        let mut deltas = Vec::with_capacity(ctx.quad.len());
        for (m, cur) in coeffs.chunks_mut(stride).enumerate() {
            deltas.push(ctx.sweep_direction(m, cur, &mut PsiAccess::Live(&mut psi))?);
        }
        Ok(deltas)
    }
}

/// Advance `old` (at `t_n`) to `t_new` on the mesh of `plan`.
///
/// `guess`, when given, is the initial iterate; otherwise the old
/// coefficients are used.
#[allow(clippy::too_many_arguments)]
pub fn advance_step(
    old: &DGField,
    plan: &StepPlan,
    re: &ReferenceElement,
    problem: &ProblemSpec,
    quad: &AngularQuadrature,
    t_new: f64,
    opts: &SolverOptions,
    guess: Option<&[f64]>,
) -> Result<(DGField, StepReport), SolveError> {
    if !old.mesh.same_connectivity(&plan.mesh) {
        return Err(SolveError::ConnectivityMismatch);
    }
    let data = sample_data(plan, re, problem, quad, t_new)?;
    let ctx = SweepContext {
        plan,
        re,
        quad,
        data: &data,
        old: &old.coeffs,
        sigma_s: problem.sigma_s,
        classification: opts.classification,
    };
    let mut coeffs = guess
        .map(|g| g.to_vec())
        .unwrap_or_else(|| old.coeffs.clone());
    let violations = plan.violations();
    // Without scattering and with dependency-respecting orders a single
    // sweep is exact.
    let one_pass_exact = problem.sigma_s == 0.0
        && violations == 0
        && opts.classification == EdgeClassification::Simple;
    let mut report = StepReport {
        iterations: 0,
        deltas: Vec::new(),
        sweep_violations: violations,
    };
    let mut growth = 0;
    loop {
        let d = source_iteration_step(&ctx, &mut coeffs, opts.parallel)?;
        let delta = d.iter().cloned().fold(0.0, f64::max);
        report.iterations += 1;
        if let Some(&prev) = report.deltas.last() {
            growth = if delta > prev { growth + 1 } else { 0 };
        }
        report.deltas.push(delta);
        if delta <= opts.tol || one_pass_exact {
            log::trace!("t = {t_new:e}: SI deltas {:?}", report.deltas);
            break;
        }
        if growth >= opts.divergence_window {
            return Err(SolveError::Diverged {
                iteration: report.iterations,
                delta,
            });
        }
        if report.iterations >= opts.max_iter {
            return Err(SolveError::IterationCap {
                iterations: report.iterations,
                last_delta: delta,
            });
        }
    }
    let field = DGField {
        degree: old.degree,
        n_modes: old.n_modes,
        n_dirs: old.n_dirs,
        mesh: plan.mesh.clone(),
        coeffs,
        time: t_new,
    };
    Ok((field, report))
}
