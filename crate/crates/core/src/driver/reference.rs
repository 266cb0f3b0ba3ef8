//! Fine-mesh reference solutions for problems without an exact solution,
//! cached on disk by a hash of their configuration.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::output::Checkpoint;
use super::run::{simulate, NoObserver};
use super::{io_err, DriverError};
use crate::dg::reference::gauss_unit;
use crate::dg::{DGField, ReferenceElement};

/// Cache file stem for `cfg` (independent of the output section).
pub fn cache_stem(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output = Default::default();
    let digest =
        Sha256::digest(format!("{}\n{}", env!("CARGO_PKG_VERSION"), c.to_toml()).as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("reference_{}_{hex}", cfg.problem.name)
}

/// Final field of `cfg`, computed once and then read from `cache_dir`.
pub fn cached_final_field(
    cfg: &RunConfig,
    base: &Path,
    cache_dir: &Path,
) -> Result<(DGField, PathBuf), DriverError> {
    let stem = cache_stem(cfg);
    let json = cache_dir.join(format!("{stem}.json"));
    if json.exists() {
        match Checkpoint::load_file(&json) {
            Ok((_, field)) => return Ok((field, json)),
            Err(e) => log::warn!(
                "ignoring unreadable reference cache {}: {e}",
                json.display()
            ),
        }
    }
    let out = simulate(cfg, base, &mut NoObserver)?;
    std::fs::create_dir_all(cache_dir).map_err(io_err(cache_dir))?;
    Checkpoint::write_stem(
        cache_dir,
        &stem,
        cfg.n_steps(),
        &cfg.problem.name,
        &out.field,
        &out.quadrature,
    )?;
    Ok((out.field, json))
}

/// `sum_m w_m int |a_m - b_m| dx` for two 1D fields on arbitrary meshes,
/// with an 8-point Gauss rule on each piece between merged breakpoints.
pub fn l1_deviation_1d(a: &DGField, b: &DGField, weights: &[f64]) -> f64 {
    assert_eq!(a.mesh.dim, 1);
    assert_eq!(b.mesh.dim, 1);
    let re_a = ReferenceElement::new(1, a.degree);
    let re_b = ReferenceElement::new(1, b.degree);
    let sorted = |f: &DGField| {
        let mut e: Vec<(f64, f64, usize)> = (0..f.mesh.n_elements())
            .map(|k| {
                let el = f.mesh.element(k);
                let (x0, x1) = (f.mesh.vertices[el[0]][0], f.mesh.vertices[el[1]][0]);
                (x0.min(x1), x0.max(x1), k)
            })
            .collect();
        e.sort_by(|p, q| p.0.total_cmp(&q.0));
        e
    };
    let (ea, eb) = (sorted(a), sorted(b));
    let mut cuts: Vec<f64> = ea.iter().chain(&eb).flat_map(|e| [e.0, e.1]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // |a - b| may change sign inside a piece; a high-order rule keeps the
    // kink error negligible.
    let rule = gauss_unit(8);
    let (mut ia, mut ib) = (0, 0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        while ia + 1 < ea.len() && ea[ia].1 <= mid {
            ia += 1;
        }
        while ib + 1 < eb.len() && eb[ib].1 <= mid {
            ib += 1;
        }
        let (ka, kb) = (ea[ia].2, eb[ib].2);
        for (s, wq) in rule.points.iter().zip(&rule.weights) {
            let x = [x0 + s[0] * (x1 - x0), 0.0];
            let xa = crate::dg::field::map_to_reference(&a.mesh, ka, x);
            let xb = crate::dg::field::map_to_reference(&b.mesh, kb, x);
            let d: f64 = weights
                .iter()
                .enumerate()
                .map(|(m, wm)| {
                    wm * (a.eval_reference(&re_a, m, ka, xa) - b.eval_reference(&re_b, m, kb, xb))
                        .abs()
                })
                .sum();
            total += wq * (x1 - x0) * d;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::project_all;
    use crate::mesh::{Domain, SimplicialMesh};
    use std::sync::Arc;

    #[test]
    fn deviation_of_linear_functions() {
        let d = Domain::interval(0.0, 1.0);
        let re = ReferenceElement::new(1, 1);
        let a = project_all(
            Arc::new(SimplicialMesh::build_uniform(d, 3).unwrap()),
            &re,
            2,
            0.0,
            |x, _| x[0],
        );
        let b = project_all(
            Arc::new(SimplicialMesh::build_uniform(d, 7).unwrap()),
            &re,
            2,
            0.0,
            |x, _| 1.0 - x[0],
        );
        // int_0^1 |2x - 1| dx = 1/2, weights sum to 1; the kink at 1/2
        // falls inside a piece
        let dev = l1_deviation_1d(&a, &b, &[0.25, 0.75]);
        assert!((dev - 0.5).abs() < 2e-4, "{dev}");
        let b = project_all(
            Arc::new(SimplicialMesh::build_uniform(d, 4).unwrap()),
            &re,
            2,
            0.0,
            |x, _| 1.0 - x[0],
        );
        let a = project_all(
            Arc::new(SimplicialMesh::build_uniform(d, 2).unwrap()),
            &re,
            2,
            0.0,
            |x, _| x[0],
        );
        let dev = l1_deviation_1d(&a, &b, &[0.25, 0.75]);
        assert!((dev - 0.5).abs() < 1e-14, "{dev}");
        assert!(l1_deviation_1d(&a, &a, &[0.5, 0.5]) < 1e-15);
    }

    #[test]
    fn cache_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::for_problem("ex6-1d");
        cfg.mesh.n = Some(8);
        cfg.discretization.t_final = 0.002;
        let (f1, p1) = cached_final_field(&cfg, Path::new("."), dir.path()).unwrap();
        assert!(p1.exists());
        let (f2, p2) = cached_final_field(&cfg, Path::new("."), dir.path()).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(f1.coeffs, f2.coeffs);
        cfg.mesh.n = Some(9);
        assert_ne!(cache_stem(&cfg), p1.file_stem().unwrap().to_str().unwrap());
    }
}
