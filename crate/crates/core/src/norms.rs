//! Error norms, their time integrals and convergence orders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::AngularQuadrature;
use crate::dg::field::map_to_physical;
use crate::dg::{DGField, ReferenceElement};
use crate::problems::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("problem '{0}' has no exact solution")]
    NoExact(String),
    #[error("need at least two (N, error) points, got {0}")]
    TooFewPoints(usize),
    #[error("errors must be positive and finite (got {0:e})")]
    NonPositive(f64),
    #[error("field has {field} directions, quadrature has {quad}")]
    DirectionMismatch { field: usize, quad: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpatialNorms {
    pub per_direction: Vec<Norms>,
    /// `sum_m w_m ||e_m||` for L1 and L2, `max_m` for L-infinity.
    pub aggregate: Norms,
}

/// Norms of `field - exact(t)`, by element-wise quadrature. L-infinity
/// is the maximum over the volume quadrature nodes.
pub fn spatial_norms(
    field: &DGField,
    re: &ReferenceElement,
    problem: &ProblemSpec,
    quad: &AngularQuadrature,
    t: f64,
) -> Result<SpatialNorms, NormError> {
    if !problem.has_exact() {
        return Err(NormError::NoExact(problem.name.clone()));
    }
    if field.n_dirs != quad.len() {
        return Err(NormError::DirectionMismatch {
            field: field.n_dirs,
            quad: quad.len(),
        });
    }
    let mesh = &field.mesh;
    let l = re.n_modes;
    let nq = re.volume.len();
    let per_direction: Vec<Norms> = (0..quad.len())
        .into_par_iter()
        .map(|m| {
            let dir = &quad.directions[m];
            let (mut s1, mut s2, mut inf) = (0.0, 0.0, 0.0f64);
            for k in 0..mesh.n_elements() {
                let area = mesh.signed_measure(k);
                let c = field.element_coeffs(m, k);
                for q in 0..nq {
                    let x = map_to_physical(mesh, k, re.volume.points[q]);
                    let uh: f64 = (0..l).map(|p| c[p] * re.vol_phi[q * l + p]).sum();
                    let e = (uh - problem.exact(x, dir, t).unwrap_or(f64::NAN)).abs();
                    let w = area * re.volume.weights[q];
                    s1 += w * e;
                    s2 += w * e * e;
                    inf = inf.max(e);
                }
            }
            Norms {
                l1: s1,
                l2: s2.sqrt(),
                linf: inf,
            }
        })
        .collect();
    let mut aggregate = Norms::default();
    for (n, w) in per_direction.iter().zip(&quad.weights) {
        aggregate.l1 += w * n.l1;
        aggregate.l2 += w * n.l2;
        aggregate.linf = aggregate.linf.max(n.linf);
    }
    Ok(SpatialNorms {
        per_direction,
        aggregate,
    })
}

/// Right-endpoint time integral `sum_n ||e(t_{n+1})|| dt`.
pub fn global_norms(per_step: &[Norms], dt: f64) -> Norms {
    per_step.iter().fold(Norms::default(), |acc, n| Norms {
        l1: acc.l1 + dt * n.l1,
        l2: acc.l2 + dt * n.l2,
        linf: acc.linf + dt * n.linf,
    })
}

/// Least-squares slope of `log(error)` against `log(h)` with
/// `h = N^{-1/dim}`.
pub fn convergence_order(dim: usize, points: &[(usize, f64)]) -> Result<f64, NormError> {
    if points.len() < 2 {
        return Err(NormError::TooFewPoints(points.len()));
    }
    if let Some(&(_, e)) = points.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return Err(NormError::NonPositive(e));
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|(n, _)| -(*n as f64).ln() / dim as f64)
        .collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    Ok(ls_slope(&xs, &ys))
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Errors of one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub problem: String,
    pub degree: usize,
    pub mesh_mode: String,
    pub n_elements: usize,
    /// `(t, norms)` at every step.
    pub steps: Vec<(f64, SpatialNorms)>,
    pub global: Norms,
    pub wall_seconds: f64,
}

impl ErrorReport {
    pub fn finish(&mut self, dt: f64) {
        let agg: Vec<Norms> = self.steps.iter().map(|(_, s)| s.aggregate).collect();
        self.global = global_norms(&agg, dt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::project_all;
    use crate::mesh::{Domain, SimplicialMesh};
    use crate::problems::catalog;
    use std::sync::Arc;

    #[test]
    fn zero_error_for_exact_constant() {
        let p = catalog("freestream-2d").unwrap();
        let quad = p.quadrature(8, 2, 4).unwrap();
        let re = ReferenceElement::new(2, 1);
        let mesh = Arc::new(
            SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 1.0), 3).unwrap(),
        );
        let f = project_all(mesh, &re, quad.len(), 0.0, |x, m| {
            p.exact(x, &quad.directions[m], 0.0).unwrap()
        });
        let n = spatial_norms(&f, &re, &p, &quad, 0.0).unwrap();
        assert!(n.aggregate.l1 < 1e-14 && n.aggregate.l2 < 1e-14 && n.aggregate.linf < 1e-14);
    }

    #[test]
    fn projection_error_converges_at_k_plus_one() {
        let p = catalog("ex1-1d").unwrap();
        let quad = p.quadrature(8, 8, 8).unwrap();
        for degree in [1, 2] {
            let re = ReferenceElement::new(1, degree);
            let errs: Vec<(usize, f64)> = [20, 40, 80]
                .iter()
                .map(|&n| {
                    let mesh = Arc::new(
                        SimplicialMesh::build_uniform(Domain::interval(0.0, 1.0), n).unwrap(),
                    );
                    let f = project_all(mesh, &re, quad.len(), 0.0, |x, m| {
                        p.exact(x, &quad.directions[m], 0.0).unwrap()
                    });
                    (
                        n,
                        spatial_norms(&f, &re, &p, &quad, 0.0).unwrap().aggregate.l2,
                    )
                })
                .collect();
            let order = convergence_order(1, &errs).unwrap();
            assert!(
                (order - (degree as f64 + 1.0)).abs() < 0.15,
                "P{degree}: {order}"
            );
            assert!(errs.windows(2).all(|w| w[1].1 < w[0].1));
        }
    }

    #[test]
    fn single_direction_aggregate_is_identity() {
        let p = catalog("ex3-2d").unwrap();
        let quad = p.quadrature(8, 8, 8).unwrap();
        let re = ReferenceElement::new(2, 1);
        let mesh = Arc::new(
            SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 1.0), 4).unwrap(),
        );
        let f = project_all(mesh, &re, 1, 0.0, |_, _| 0.3);
        let n = spatial_norms(&f, &re, &p, &quad, 0.05).unwrap();
        assert_eq!(n.aggregate, n.per_direction[0]);
        // Cauchy-Schwarz with |D| = 1
        assert!(n.aggregate.l1 <= n.aggregate.l2 + 1e-15);
    }

    #[test]
    fn global_norm_examples() {
        let v = Norms {
            l1: 2.0,
            l2: 3.0,
            linf: 4.0,
        };
        let g = global_norms(&vec![v; 100], 1e-3);
        assert!(
            (g.l1 - 0.2).abs() < 1e-14
                && (g.l2 - 0.3).abs() < 1e-14
                && (g.linf - 0.4).abs() < 1e-14
        );
        let mut steps = vec![Norms::default(); 10];
        steps[4] = v;
        assert_eq!(global_norms(&steps, 1e-3).l1, 2e-3);
    }

    #[test]
    fn order_of_power_law() {
        let h: f64 = 0.1;
        let c = 3.0;
        let pts = [(10, c * h * h), (20, c * h * h / 4.0)];
        assert!((convergence_order(1, &pts).unwrap() - 2.0).abs() < 1e-12);
        let pts2 = [(50, 1.0), (200, 0.25), (800, 0.0625)];
        assert!((convergence_order(2, &pts2).unwrap() - 2.0).abs() < 1e-12);
        assert!(convergence_order(1, &[(10, 1.0)]).is_err());
        assert!(convergence_order(1, &[(10, 1.0), (20, 0.0)]).is_err());
    }

    #[test]
    fn no_exact_rejected() {
        let p = catalog("ex6-1d").unwrap();
        let quad = p.quadrature(8, 8, 8).unwrap();
        let re = ReferenceElement::new(1, 1);
        let mesh = Arc::new(SimplicialMesh::build_uniform(Domain::interval(0.0, 1.0), 4).unwrap());
        let f = DGField::zeros(mesh, 1, quad.len(), 0.0);
        assert!(matches!(
            spatial_norms(&f, &re, &p, &quad, 0.0),
            Err(NormError::NoExact(_))
        ));
    }
}
