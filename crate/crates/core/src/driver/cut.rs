//! Line cuts through a checkpointed field.

use std::io::Write;
use std::path::Path;

use super::config::RunConfig;
use super::output::Checkpoint;
use super::{io_err, DriverError};
use crate::angular::Direction;
use crate::dg::field::map_to_reference;
use crate::dg::reference::barycentric;
use crate::dg::{DGField, ReferenceElement};
use crate::mesh::{Domain, Point};

pub const CUT_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutLine {
    /// `x[axis] = value`; `axis` is 0 for x, 1 for y.
    Axis { axis: usize, value: f64 },
    /// `y = slope * x + intercept`.
    Line { slope: f64, intercept: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutRow {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub exact: Option<f64>,
}

/// `n` equispaced points of `line` inside `domain` (the whole interval in 1D).
pub fn line_points(domain: &Domain, line: CutLine, n: usize) -> Result<Vec<Point>, DriverError> {
    let (lo, hi) = (domain.lo, domain.hi);
    let lerp = |a: f64, b: f64, i: usize| {
        if n == 1 {
            a
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    };
    if domain.dim == 1 {
        return Ok((0..n).map(|i| [lerp(lo[0], hi[0], i), 0.0]).collect());
    }
    match line {
        CutLine::Axis { axis, value } => {
            if axis > 1 || value < lo[axis] || value > hi[axis] {
                return Err(DriverError::LineOutsideDomain);
            }
            let o = 1 - axis;
            Ok((0..n)
                .map(|i| {
                    let mut p = [0.0; 2];
                    p[axis] = value;
                    p[o] = lerp(lo[o], hi[o], i);
                    p
                })
                .collect())
        }
        CutLine::Line { slope, intercept } => {
            let (mut a, mut b) = (lo[0], hi[0]);
            if slope == 0.0 {
                if intercept < lo[1] || intercept > hi[1] {
                    return Err(DriverError::LineOutsideDomain);
                }
            } else {
                let x0 = (lo[1] - intercept) / slope;
                let x1 = (hi[1] - intercept) / slope;
                a = a.max(x0.min(x1));
                b = b.min(x0.max(x1));
            }
            if !(b > a) {
                return Err(DriverError::LineOutsideDomain);
            }
            Ok((0..n)
                .map(|i| {
                    let x = lerp(a, b, i);
                    [x, (slope * x + intercept).clamp(lo[1], hi[1])]
                })
                .collect())
        }
    }
}

/// Element containing `x` (the one with the largest minimum barycentric
/// coordinate, so points on shared faces resolve deterministically).
fn locate(field: &DGField, x: Point) -> (usize, [f64; 2]) {
    let mesh = &field.mesh;
    let dim = mesh.dim;
    let mut best = (usize::MAX, f64::NEG_INFINITY, [0.0; 2]);
    for k in 0..mesh.n_elements() {
        let xi = map_to_reference(mesh, k, x);
        let lam = barycentric(dim, xi);
        let m = lam[..=dim].iter().cloned().fold(f64::INFINITY, f64::min);
        if m > best.1 {
            best = (k, m, xi);
            if m >= 0.0 {
                break;
            }
        }
    }
    (best.0, best.2)
}

/// Sample direction `m` of `field` on `points`.
pub fn sample(field: &DGField, re: &ReferenceElement, m: usize, points: &[Point]) -> Vec<f64> {
    points
        .iter()
        .map(|&x| {
            let (k, xi) = locate(field, x);
            field.eval_reference(re, m, k, xi)
        })
        .collect()
}

/// Cut the checkpoint of `step` (default: last) in `run_dir` along `line`
/// for direction `m`.
pub fn cut(
    run_dir: &Path,
    line: CutLine,
    m: usize,
    step: Option<usize>,
) -> Result<Vec<CutRow>, DriverError> {
    let (cp, field) = Checkpoint::load(run_dir, step)?;
    if m >= field.n_dirs {
        return Err(DriverError::Config(format!(
            "direction {m} out of range (0..{})",
            field.n_dirs
        )));
    }
    let cfg_path = run_dir.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let cfg = RunConfig::from_toml(&text)?;
    let problem = cfg.problem_spec(run_dir)?;
    let re = ReferenceElement::new(field.mesh.dim, field.degree);
    let points = line_points(&field.mesh.domain, line, CUT_POINTS)?;
    let values = sample(&field, &re, m, &points);
    let d = cp.directions[m];
    let dir = Direction {
        omega: [d[0], d[1]],
        mu: d[2],
    };
    Ok(points
        .iter()
        .zip(values)
        .map(|(p, value)| CutRow {
            x: p[0],
            y: p[1],
            value,
            exact: problem.exact(*p, &dir, field.time),
        })
        .collect())
}

/// CSV `x,y,I_m[,exact]`.
pub fn write_cut(out: &mut dyn Write, rows: &[CutRow], m: usize) -> std::io::Result<()> {
    let with_exact = rows.iter().all(|r| r.exact.is_some());
    if with_exact {
        writeln!(out, "x,y,I_{m},exact")?;
    } else {
        writeln!(out, "x,y,I_{m}")?;
    }
    for r in rows {
        match (with_exact, r.exact) {
            (true, Some(e)) => writeln!(out, "{},{},{},{}", r.x, r.y, r.value, e)?,
            _ => writeln!(out, "{},{},{}", r.x, r.y, r.value)?,
        }
    }
    Ok(())
}

pub fn write_cut_file(path: &Path, rows: &[CutRow], m: usize) -> Result<(), DriverError> {
    let mut buf = Vec::new();
    write_cut(&mut buf, rows, m).map_err(io_err(path))?;
    std::fs::write(path, buf).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_and_slope_lines() {
        let d = Domain::rectangle(-1.0, 1.0, -1.0, 1.0);
        let p = line_points(
            &d,
            CutLine::Axis {
                axis: 1,
                value: 0.495,
            },
            1000,
        )
        .unwrap();
        assert_eq!(p.len(), 1000);
        assert_eq!(p[0], [-1.0, 0.495]);
        assert_eq!(p[999], [1.0, 0.495]);
        let p = line_points(
            &d,
            CutLine::Line {
                slope: 0.8,
                intercept: 0.0,
            },
            11,
        )
        .unwrap();
        assert_eq!(p[0], [-1.0, -0.8]);
        assert!((p[10][1] - 0.8).abs() < 1e-15);
        // steep line clipped by y
        let p = line_points(
            &d,
            CutLine::Line {
                slope: 2.0,
                intercept: 0.0,
            },
            3,
        )
        .unwrap();
        assert_eq!(p[0], [-0.5, -1.0]);
        assert_eq!(p[2], [0.5, 1.0]);
    }

    #[test]
    fn lines_outside_rejected() {
        let d = Domain::rectangle(0.0, 1.0, 0.0, 1.0);
        assert!(matches!(
            line_points(
                &d,
                CutLine::Axis {
                    axis: 1,
                    value: 1.5
                },
                10
            ),
            Err(DriverError::LineOutsideDomain)
        ));
        assert!(matches!(
            line_points(
                &d,
                CutLine::Line {
                    slope: 1.0,
                    intercept: 3.0
                },
                10
            ),
            Err(DriverError::LineOutsideDomain)
        ));
        assert!(matches!(
            line_points(
                &d,
                CutLine::Line {
                    slope: 0.0,
                    intercept: -0.1
                },
                10
            ),
            Err(DriverError::LineOutsideDomain)
        ));
    }

    #[test]
    fn constant_field_cut_is_constant() {
        use crate::dg::project;
        use crate::mesh::SimplicialMesh;
        use std::sync::Arc;
        let mesh = Arc::new(
            SimplicialMesh::build_uniform(Domain::rectangle(0.0, 1.0, 0.0, 1.0), 5).unwrap(),
        );
        let re = ReferenceElement::new(2, 2);
        let f = project(mesh, &re, |_| 1.25);
        let pts = line_points(
            &f.mesh.domain,
            CutLine::Axis {
                axis: 1,
                value: 0.495,
            },
            1000,
        )
        .unwrap();
        let v = sample(&f, &re, 0, &pts);
        assert!(v.iter().all(|x| (x - 1.25).abs() < 1e-13));
    }
}
