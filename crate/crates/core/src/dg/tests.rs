use std::sync::Arc;

use super::*;
use crate::angular::{AngularQuadrature, Direction};
use crate::mesh::{Domain, MovingMesh, SimplicialMesh};
use crate::problems::catalog;

fn unit_square(n: usize) -> SimplicialMesh {
    SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 1.0), n).unwrap()
}

/// Interior vertices displaced by a smooth bump, boundary vertices slid
/// along their edge.
fn wobble(mesh: &SimplicialMesh, amp: f64) -> SimplicialMesh {
    use std::f64::consts::PI;
    let v = mesh
        .vertices
        .iter()
        .map(|p| {
            let s = (PI * p[0]).sin() * (PI * p[1]).sin();
            let dx =
                amp * s + amp * 0.5 * (PI * p[0]).sin() * (p[1] == 0.0 || p[1] == 1.0) as u8 as f64;
            let dy = -amp * s;
            [p[0] + dx, p[1] + dy]
        })
        .collect();
    mesh.with_vertices(v)
}

fn freestream_step(
    degree: usize,
    moving: bool,
    dt: f64,
    classification: EdgeClassification,
) -> f64 {
    let p = catalog("freestream-2d").unwrap();
    let quad = p.quadrature(8, 8, 8).unwrap();
    let re = ReferenceElement::new(2, degree);
    let old_mesh = unit_square(6);
    let (new_mesh, vel) = if moving {
        let new = wobble(&old_mesh, 0.04);
        let mm = MovingMesh::new(old_mesh.clone(), new.clone(), 0.0, dt).unwrap();
        mm.validate().unwrap();
        (new, Some(mm.velocities()))
    } else {
        (old_mesh.clone(), None)
    };
    let old = project_all(Arc::new(old_mesh), &re, quad.len(), 0.0, |x, m| {
        p.initial(x, &quad.directions[m])
    });
    let plan = StepPlan::new(
        Arc::new(new_mesh),
        vel.as_deref(),
        &re,
        &p,
        &quad,
        dt,
        SweepKind::Centroid,
    );
    let opts = SolverOptions {
        classification,
        ..Default::default()
    };
    let (new, rep) = advance_step(&old, &plan, &re, &p, &quad, dt, &opts, None).unwrap();
    assert!(rep.iterations >= 1);
    let a = p.exact([0.0, 0.0], &quad.directions[0], 0.0).unwrap();
    let l = re.n_modes;
    new.coeffs
        .chunks(l)
        .map(|c| {
            (c[0] - a)
                .abs()
                .max(c[1..].iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })
        .fold(0.0, f64::max)
}

#[test]
fn freestream_preserved_on_fixed_mesh() {
    for degree in [1, 2] {
        let e = freestream_step(degree, false, 0.01, EdgeClassification::Simple);
        assert!(e <= 1e-10, "P{degree}: {e:e}");
    }
}

#[test]
fn freestream_preserved_on_moving_mesh() {
    for degree in [1, 2] {
        // mesh speed well below c
        let e = freestream_step(degree, true, 1.0, EdgeClassification::Simple);
        assert!(e <= 1e-8, "P{degree}: {e:e}");
        // mesh speed above c: only the corrected classification is upwind
        let e = freestream_step(degree, true, 0.01, EdgeClassification::VelocityCorrected);
        assert!(e <= 1e-8, "P{degree}: {e:e}");
    }
}

#[test]
fn freestream_preserved_in_one_dimension_with_motion() {
    let p = catalog("freestream-1d").unwrap();
    let quad = p.quadrature(8, 8, 8).unwrap();
    let re = ReferenceElement::new(1, 2);
    let old_mesh = SimplicialMesh::build_uniform(Domain::interval(0.0, 1.0), 12).unwrap();
    let v: Vec<_> = old_mesh
        .vertices
        .iter()
        .map(|x| [x[0] + 0.02 * (std::f64::consts::PI * x[0]).sin(), 0.0])
        .collect();
    let new_mesh = old_mesh.with_vertices(v);
    let mm = MovingMesh::new(old_mesh.clone(), new_mesh.clone(), 0.0, 0.1).unwrap();
    let vel = mm.velocities();
    let old = project_all(Arc::new(old_mesh), &re, quad.len(), 0.0, |x, m| {
        p.initial(x, &quad.directions[m])
    });
    let plan = StepPlan::new(
        Arc::new(new_mesh),
        Some(&vel),
        &re,
        &p,
        &quad,
        0.1,
        SweepKind::Centroid,
    );
    let (new, _) = advance_step(
        &old,
        &plan,
        &re,
        &p,
        &quad,
        0.1,
        &SolverOptions::default(),
        None,
    )
    .unwrap();
    for c in new.coeffs.chunks(3) {
        assert!(
            (c[0] - 2.0).abs() < 1e-10 && c[1].abs() < 1e-10 && c[2].abs() < 1e-10,
            "{c:?}"
        );
    }
}

#[test]
fn pure_transport_needs_one_sweep() {
    let p = catalog("ex3-2d").unwrap();
    let quad = p.quadrature(8, 8, 8).unwrap();
    let re = ReferenceElement::new(2, 1);
    let mesh = Arc::new(unit_square(8));
    let old = project_all(mesh.clone(), &re, 1, 0.0, |x, m| {
        p.initial(x, &quad.directions[m])
    });
    for kind in [SweepKind::Centroid, SweepKind::Topological] {
        let plan = StepPlan::new(mesh.clone(), None, &re, &p, &quad, 1e-3, kind);
        assert_eq!(plan.violations(), 0);
        let (one, rep) = advance_step(
            &old,
            &plan,
            &re,
            &p,
            &quad,
            1e-3,
            &SolverOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        // Iterating to convergence changes nothing.
        let opts = SolverOptions {
            classification: EdgeClassification::VelocityCorrected,
            ..Default::default()
        };
        let (conv, rep2) = advance_step(&old, &plan, &re, &p, &quad, 1e-3, &opts, None).unwrap();
        assert!(rep2.iterations >= 2);
        assert!(*rep2.deltas.last().unwrap() <= 1e-12);
        let diff = one
            .coeffs
            .iter()
            .zip(&conv.coeffs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert_eq!(diff, 0.0);
    }
}

#[test]
fn classifications_agree_for_slow_mesh_motion() {
    let old = unit_square(5);
    let new = wobble(&old, 0.03);
    let mm = MovingMesh::new(old, new.clone(), 0.0, 1e-3).unwrap();
    let vel = mm.velocities();
    let re = ReferenceElement::new(2, 1);
    let ops = StepOperators::new(&new, Some(&vel), &re, &|_| 1.0, 3.0e8, 1e-3);
    let quad = AngularQuadrature::legendre_chebyshev_2d(8, 8).unwrap();
    for dir in &quad.directions {
        let a = classify_edges(&ops, dir, EdgeClassification::Simple);
        let b = classify_edges(&ops, dir, EdgeClassification::VelocityCorrected);
        for (slot, (ca, cb)) in a.iter().zip(&b).enumerate() {
            if dir.dot(ops.faces[slot].normal).abs() > 1e-6 {
                assert_eq!(ca, cb, "face slot {slot}");
            }
        }
    }
    // With the mesh moving at a speed comparable to c the two differ.
    let ops = StepOperators::new(&new, Some(&vel), &re, &|_| 1.0, 1e-3, 1e-3);
    let dir = Direction::planar(0.3, 0.2);
    let a = classify_edges(&ops, &dir, EdgeClassification::Simple);
    let b = classify_edges(&ops, &dir, EdgeClassification::VelocityCorrected);
    assert_ne!(a, b);
}

#[test]
fn mass_matrix_is_diagonal_on_skewed_elements() {
    let dom = Domain::rectangle(0.0, 4.0, 0.0, 1.0);
    let mesh = SimplicialMesh::from_parts(
        dom,
        vec![[0.0, 0.0], [3.7, 0.1], [3.9, 0.35]],
        vec![0, 1, 2],
    )
    .unwrap();
    for degree in [1, 2] {
        let re = ReferenceElement::new(2, degree);
        let ops = StepOperators::new(&mesh, None, &re, &|_| 1.0, 1.0, 1.0);
        let l = re.n_modes;
        let area = mesh.signed_measure(0);
        for i in 0..l {
            for j in 0..l {
                let e = if i == j { area } else { 0.0 };
                assert!((ops.sig_mass[i * l + j] - e).abs() < 1e-13 * area.max(1.0));
            }
        }
    }
}

#[test]
fn parallel_and_sequential_iterations_agree() {
    let p = catalog("ex1-2d").unwrap();
    let quad = p.quadrature(8, 4, 4).unwrap();
    let re = ReferenceElement::new(2, 1);
    let mesh = Arc::new(unit_square(4));
    let old = project_all(mesh.clone(), &re, quad.len(), 0.0, |x, m| {
        p.initial(x, &quad.directions[m])
    });
    let plan = StepPlan::new(mesh, None, &re, &p, &quad, 1e-3, SweepKind::Topological);
    let seq = advance_step(
        &old,
        &plan,
        &re,
        &p,
        &quad,
        1e-3,
        &SolverOptions::default(),
        None,
    )
    .unwrap();
    let opts = SolverOptions {
        parallel: true,
        ..Default::default()
    };
    let par = advance_step(&old, &plan, &re, &p, &quad, 1e-3, &opts, None).unwrap();
    let diff = seq
        .0
        .coeffs
        .iter()
        .zip(&par.0.coeffs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-10, "{diff:e}");
    assert!(par.1.iterations >= seq.1.iterations);
}

#[test]
fn missing_boundary_data_is_an_error() {
    // A mesh of the unit square under a problem posed on (-1, 1)^2: the
    // mesh boundary is not the problem's inflow boundary.
    let p = catalog("ex5-2d").unwrap();
    let quad = p.quadrature(8, 2, 2).unwrap();
    let re = ReferenceElement::new(2, 1);
    let mesh = Arc::new(unit_square(2));
    let old = DGField::zeros(mesh.clone(), 1, quad.len(), 0.0);
    let plan = StepPlan::new(mesh, None, &re, &p, &quad, 1e-3, SweepKind::Centroid);
    let err = advance_step(
        &old,
        &plan,
        &re,
        &p,
        &quad,
        1e-3,
        &SolverOptions::default(),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, SolveError::MissingBoundary { .. }));
}

#[test]
fn connectivity_mismatch_rejected() {
    let p = catalog("freestream-2d").unwrap();
    let quad = p.quadrature(8, 2, 2).unwrap();
    let re = ReferenceElement::new(2, 1);
    let old = DGField::zeros(Arc::new(unit_square(2)), 1, quad.len(), 0.0);
    let plan = StepPlan::new(
        Arc::new(unit_square(3)),
        None,
        &re,
        &p,
        &quad,
        1e-3,
        SweepKind::Centroid,
    );
    let err = advance_step(
        &old,
        &plan,
        &re,
        &p,
        &quad,
        1e-3,
        &SolverOptions::default(),
        None,
    )
    .unwrap_err();
    assert_eq!(err, SolveError::ConnectivityMismatch);
}
