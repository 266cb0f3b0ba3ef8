//! The alternating loop: move the mesh from the solution at `t_n`, then take
//! a backward-Euler step on the mesh pair.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{MeshMode, RunConfig};
use super::output::{OutputWriter, RunManifest};
use super::DriverError;
use crate::angular::AngularQuadrature;
use crate::dg::{advance_step, project_all, DGField, InitialGuess, ReferenceElement, StepPlan};
use crate::mesh::{MeshError, MovingMesh, SimplicialMesh};
use crate::metric::{build_metric, HessianRecovery, MetricField};
use crate::mmpde::{move_mesh, MmpdeTrace};
use crate::norms::{spatial_norms, ErrorReport, SpatialNorms};
use crate::problems::ProblemSpec;

/// What happened in one time step.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub si_iterations: usize,
    pub last_delta: f64,
    pub sweep_violations: usize,
    pub min_area: f64,
    pub mmpde_substeps: usize,
    pub mmpde_rejected: usize,
    pub mmpde_stopped_early: bool,
    /// Fraction of the MMPDE displacement used (1 unless the map tangled).
    pub mmpde_applied: f64,
    pub energy_start: Option<f64>,
    pub energy_end: Option<f64>,
}

/// Slab from `old` to `new`; when an element inverts at an intermediate
/// time, the vertex displacement is halved until the slab is valid. Also
/// returns the fraction of the displacement kept.
fn valid_slab(
    old: &SimplicialMesh,
    new: SimplicialMesh,
    t0: f64,
    t1: f64,
) -> Result<(MovingMesh, f64), MeshError> {
    let mut s = 1.0;
    let mut target = new;
    for _ in 0..8 {
        let slab = MovingMesh::new(old.clone(), target.clone(), t0, t1)?;
        if slab.validate().is_ok() {
            return Ok((slab, s));
        }
        s *= 0.5;
        let v = old
            .vertices
            .iter()
            .zip(&target.vertices)
            .map(|(a, b)| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
            .collect();
        target = old.with_vertices(v);
    }
    log::debug!("mesh step fell back to the unchanged mesh");
    Ok((MovingMesh::new(old.clone(), old.clone(), t0, t1)?, 0.0))
}

/// Hooks called by [`simulate`]; all default to no-ops.
pub trait Observer {
    fn on_start(&mut self, _field: &DGField, _quad: &AngularQuadrature) -> Result<(), DriverError> {
        Ok(())
    }
    fn on_init_adapt(
        &mut self,
        _cycle: usize,
        _metric: &MetricField,
        _trace: &MmpdeTrace,
    ) -> Result<(), DriverError> {
        Ok(())
    }
    #[allow(clippy::too_many_arguments)]
    fn on_step(
        &mut self,
        _diag: &StepDiagnostics,
        _field: &DGField,
        _errors: Option<&SpatialNorms>,
        _metric: Option<&MetricField>,
        _trace: Option<&MmpdeTrace>,
    ) -> Result<(), DriverError> {
        Ok(())
    }
}

pub struct NoObserver;

impl Observer for NoObserver {}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub field: DGField,
    /// Present when the problem has an exact solution.
    pub errors: Option<ErrorReport>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub init_traces: Vec<MmpdeTrace>,
    pub quadrature: AngularQuadrature,
    pub problem: ProblemSpec,
    pub wall_seconds: f64,
}

impl RunOutcome {
    pub fn max_si_iterations(&self) -> usize {
        self.diagnostics
            .iter()
            .map(|d| d.si_iterations)
            .max()
            .unwrap_or(0)
    }
}

fn step_err(step: usize, t: f64) -> impl FnOnce(crate::Error) -> DriverError {
    move |e| DriverError::Step {
        step,
        t,
        source: Box::new(e),
    }
}

struct Adapter<'a> {
    reference: &'a SimplicialMesh,
    re: &'a ReferenceElement,
    tau: f64,
    passes: usize,
    opts: crate::mmpde::MmpdeOptions,
}

impl Adapter<'_> {
    /// Metric from `field` on its own mesh, then one MMPDE solve over
    /// `interval`.
    fn adapt(
        &self,
        field: &DGField,
        interval: f64,
    ) -> Result<(SimplicialMesh, MetricField, MmpdeTrace), crate::Error> {
        let recovery = HessianRecovery::new(&field.mesh, self.re)?;
        let metric = build_metric(field, &recovery, self.passes)?;
        let (mesh, trace) = move_mesh(
            &field.mesh,
            self.reference,
            &metric.tensors,
            self.tau,
            interval,
            &self.opts,
        )?;
        Ok((mesh, metric, trace))
    }
}

/// Run `cfg` without writing files. `base` resolves relative paths of user
/// problem data.
pub fn simulate(
    cfg: &RunConfig,
    base: &Path,
    observer: &mut dyn Observer,
) -> Result<RunOutcome, DriverError> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = cfg.problem_spec(base)?;
    let a = &cfg.angular;
    let quad = problem.quadrature(a.order_1d, a.n_polar, a.n_azimuthal)?;
    let re = ReferenceElement::new(problem.dim, cfg.discretization.degree);
    let reference = SimplicialMesh::build_uniform(problem.domain, cfg.subdivisions(problem.dim))?;
    let dt = cfg.discretization.dt;
    let n_steps = cfg.n_steps();
    let moving = cfg.mesh.mode == MeshMode::Moving;
    let tau = cfg.mmpde.tau.unwrap_or_else(|| problem.tau_default());
    let adapter = Adapter {
        reference: &reference,
        re: &re,
        tau,
        passes: cfg.mmpde.metric_smoothing,
        opts: cfg.mmpde.options(),
    };
    let project_ic = |mesh: Arc<SimplicialMesh>| {
        project_all(mesh, &re, quad.len(), 0.0, |x, m| {
            problem.initial(x, &quad.directions[m])
        })
    };

    let mut field = project_ic(Arc::new(reference.clone()));
    // Adapt to the initial condition: each cycle is one mesh step of length
    // dt followed by a fresh projection of the initial data.
    let mut init_traces = Vec::new();
    for cycle in 0..cfg.init_adapt() {
        let wrap = |e: crate::Error| DriverError::InitAdapt {
            cycle,
            source: Box::new(e),
        };
        let (mesh, metric, trace) = adapter.adapt(&field, dt).map_err(wrap)?;
        mesh.validate().map_err(|e| wrap(e.into()))?;
        observer.on_init_adapt(cycle, &metric, &trace)?;
        init_traces.push(trace);
        field = project_ic(Arc::new(mesh));
    }
    observer.on_start(&field, &quad)?;

    let mut errors = problem.has_exact().then(|| ErrorReport {
        problem: problem.name.clone(),
        degree: cfg.discretization.degree,
        mesh_mode: cfg.mesh.mode.as_str().to_string(),
        n_elements: reference.n_elements(),
        ..Default::default()
    });
    let mut diagnostics = Vec::with_capacity(n_steps);
    let mut fixed_plan: Option<StepPlan> = None;
    let mut previous: Option<Vec<f64>> = None;
    for step in 1..=n_steps {
        let t_old = (step - 1) as f64 * dt;
        let t_new = step as f64 * dt;
        let wrap = step_err(step, t_new);
        let mut diag = StepDiagnostics {
            step,
            t: t_new,
            ..Default::default()
        };
        let (plan, metric, trace) = if moving {
            let (new_mesh, metric, trace) = adapter.adapt(&field, dt).map_err(wrap)?;
            let (slab, fraction) = valid_slab(&field.mesh, new_mesh, t_old, t_new)
                .map_err(|e| step_err(step, t_new)(e.into()))?;
            let vel = slab.velocities();
            diag.mmpde_substeps = trace.substeps;
            diag.mmpde_rejected = trace.rejected;
            diag.mmpde_stopped_early = trace.stopped_early;
            diag.mmpde_applied = trace.applied * fraction;
            diag.energy_start = trace.energies.first().copied();
            diag.energy_end = trace.energies.last().copied();
            let plan = StepPlan::new(
                Arc::new(slab.new),
                Some(&vel),
                &re,
                &problem,
                &quad,
                dt,
                cfg.solver.sweep,
            );
            (Some(plan), Some(metric), Some(trace))
        } else {
            if fixed_plan.is_none() {
                fixed_plan = Some(StepPlan::new(
                    field.mesh.clone(),
                    None,
                    &re,
                    &problem,
                    &quad,
                    dt,
                    cfg.solver.sweep,
                ));
            }
            (None, None, None)
        };
        let plan_ref = plan.as_ref().or(fixed_plan.as_ref()).expect("plan built");
        let guess: Option<Vec<f64>> = match (cfg.solver.initial_guess, &previous) {
            (InitialGuess::Extrapolate, Some(prev)) => Some(
                field
                    .coeffs
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| 2.0 * a - b)
                    .collect(),
            ),
            _ => None,
        };
        let (new_field, report) = advance_step(
            &field,
            plan_ref,
            &re,
            &problem,
            &quad,
            t_new,
            &cfg.solver,
            guess.as_deref(),
        )
        .map_err(|e| step_err(step, t_new)(e.into()))?;
        diag.si_iterations = report.iterations;
        diag.last_delta = report.deltas.last().copied().unwrap_or(0.0);
        diag.sweep_violations = report.sweep_violations;
        diag.min_area = new_field.mesh.min_measure();
        log::debug!(
            "step {step} t={t_new:.4} si={} min_area={:.3e}",
            diag.si_iterations,
            diag.min_area
        );
        let step_norms = match errors.as_mut() {
            Some(rep) => {
                let n = spatial_norms(&new_field, &re, &problem, &quad, t_new)
                    .map_err(|e| step_err(step, t_new)(e.into()))?;
                rep.steps.push((t_new, n));
                rep.steps.last().map(|(_, n)| n)
            }
            None => None,
        };
        observer.on_step(
            &diag,
            &new_field,
            step_norms,
            metric.as_ref(),
            trace.as_ref(),
        )?;
        diagnostics.push(diag);
        if cfg.solver.initial_guess == InitialGuess::Extrapolate {
            previous = Some(std::mem::take(&mut field.coeffs));
        }
        field = new_field;
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Some(rep) = errors.as_mut() {
        rep.finish(dt);
        rep.wall_seconds = wall_seconds;
    }
    Ok(RunOutcome {
        field,
        errors,
        diagnostics,
        init_traces,
        quadrature: quad,
        problem,
        wall_seconds,
    })
}

/// Run `cfg` and write its outputs to `cfg.output.dir`. `overrides` are
/// only recorded.
pub fn run(
    cfg: &RunConfig,
    base: &Path,
    overrides: &[String],
) -> Result<(RunOutcome, RunManifest), DriverError> {
    let dir = cfg
        .output
        .dir
        .clone()
        .ok_or_else(|| DriverError::Config("output.dir is required".into()))?;
    let dir = if dir.is_absolute() {
        dir
    } else {
        base.join(dir)
    };
    let resolved = resolve_paths(cfg, base);
    let mut writer = OutputWriter::create(&dir, &resolved)?;
    let outcome = simulate(&resolved, base, &mut writer)?;
    let manifest = writer.finish(&resolved, overrides, &outcome)?;
    Ok((outcome, manifest))
}

/// Copy of `cfg` with user data paths made absolute, so the run directory
/// is self-describing.
fn resolve_paths(cfg: &RunConfig, base: &Path) -> RunConfig {
    let mut out = cfg.clone();
    if let Some(u) = out.problem.user.as_mut() {
        for p in [&mut u.initial_csv, &mut u.boundary_csv]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    out
}
