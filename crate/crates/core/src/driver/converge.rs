//! Convergence ladders: runs over degrees x element counts x mesh modes.

use std::path::Path;

use super::config::{LadderConfig, MeshMode, RunConfig};
use super::run::{simulate, NoObserver};
use super::{io_err, DriverError};
use crate::norms::{convergence_order, Norms};

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub problem: String,
    pub degree: usize,
    pub mesh_mode: MeshMode,
    /// Actual element count.
    pub n_elements: usize,
    pub dim: usize,
    /// Global (time-integrated) errors; `None` when the run failed.
    pub norms: Option<Norms>,
    /// Order against the previous row of the same degree and mode.
    pub order_l1: Option<f64>,
    pub order_l2: Option<f64>,
    pub cpu_seconds: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub problem: String,
    pub degree: usize,
    pub mesh_mode: MeshMode,
    /// Least-squares slopes over the successful rows.
    pub l1: Option<f64>,
    pub l2: Option<f64>,
}

/// One ladder entry; failures are recorded, not propagated.
pub fn ladder_row(cfg: &RunConfig, base: &Path) -> LadderRow {
    let mut row = LadderRow {
        problem: cfg.problem.name.clone(),
        degree: cfg.discretization.degree,
        mesh_mode: cfg.mesh.mode,
        n_elements: cfg.mesh.elements.unwrap_or(0),
        dim: 0,
        norms: None,
        order_l1: None,
        order_l2: None,
        cpu_seconds: 0.0,
        failure: None,
    };
    match simulate(cfg, base, &mut NoObserver) {
        Ok(out) => {
            row.n_elements = out.field.mesh.n_elements();
            row.dim = out.field.mesh.dim;
            row.cpu_seconds = out.wall_seconds;
            match out.errors {
                Some(e) => row.norms = Some(e.global),
                None => {
                    row.failure = Some(format!(
                        "problem '{}' has no exact solution",
                        cfg.problem.name
                    ))
                }
            }
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

fn local_order(dim: usize, a: (usize, f64), b: (usize, f64)) -> Option<f64> {
    convergence_order(dim, &[a, b]).ok()
}

/// Fill the local orders and compute per-group slopes.
pub fn summarize(rows: &mut [LadderRow]) -> Vec<SlopeRow> {
    let mut slopes = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i + 1;
        while j < rows.len()
            && rows[j].degree == rows[i].degree
            && rows[j].mesh_mode == rows[i].mesh_mode
        {
            j += 1;
        }
        let dim = rows[i..j].iter().map(|r| r.dim).max().unwrap_or(1).max(1);
        let mut prev: Option<(usize, Norms)> = None;
        for r in rows[i..j].iter_mut() {
            if let Some(n) = r.norms {
                if let Some((pn, p)) = prev {
                    r.order_l1 = local_order(dim, (pn, p.l1), (r.n_elements, n.l1));
                    r.order_l2 = local_order(dim, (pn, p.l2), (r.n_elements, n.l2));
                }
                prev = Some((r.n_elements, n));
            }
        }
        let ok: Vec<(usize, Norms)> = rows[i..j]
            .iter()
            .filter_map(|r| r.norms.map(|n| (r.n_elements, n)))
            .collect();
        let pts = |f: fn(&Norms) -> f64| ok.iter().map(|(n, v)| (*n, f(v))).collect::<Vec<_>>();
        slopes.push(SlopeRow {
            problem: rows[i].problem.clone(),
            degree: rows[i].degree,
            mesh_mode: rows[i].mesh_mode,
            l1: convergence_order(dim, &pts(|n| n.l1)).ok(),
            l2: convergence_order(dim, &pts(|n| n.l2)).ok(),
        });
        i = j;
    }
    slopes
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

pub fn rows_csv(rows: &[LadderRow]) -> String {
    let mut s =
        String::from("problem,degree,mesh_mode,N,L1,L2,Linf,order_L1,order_L2,cpu_seconds\n");
    for r in rows {
        let (l1, l2, linf) = match (r.norms, &r.failure) {
            (Some(n), _) => (n.l1.to_string(), n.l2.to_string(), n.linf.to_string()),
            (None, _) => ("failed".into(), "failed".into(), "failed".into()),
        };
        s.push_str(&format!(
            "{},{},{},{},{l1},{l2},{linf},{},{},{}\n",
            r.problem,
            r.degree,
            r.mesh_mode.as_str(),
            r.n_elements,
            opt(r.order_l1),
            opt(r.order_l2),
            r.cpu_seconds
        ));
    }
    s
}

pub fn slopes_csv(slopes: &[SlopeRow]) -> String {
    let mut s = String::from("problem,degree,mesh_mode,slope_L1,slope_L2\n");
    for r in slopes {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.problem,
            r.degree,
            r.mesh_mode.as_str(),
            opt(r.l1),
            opt(r.l2)
        ));
    }
    s
}

/// Run the ladder. With `output.dir` set, writes `convergence.csv`,
/// `slopes.csv` and `failures.txt` (when any run failed) there.
pub fn converge(
    ladder: &LadderConfig,
    base: &Path,
) -> Result<(Vec<LadderRow>, Vec<SlopeRow>), DriverError> {
    let mut rows = Vec::new();
    for cfg in ladder.runs() {
        let row = ladder_row(&cfg, base);
        match &row.failure {
            Some(f) => log::warn!(
                "{} P{} {} N={}: {f}",
                row.problem,
                row.degree,
                row.mesh_mode.as_str(),
                row.n_elements
            ),
            None => log::info!(
                "{} P{} {} N={} done in {:.1}s",
                row.problem,
                row.degree,
                row.mesh_mode.as_str(),
                row.n_elements,
                row.cpu_seconds
            ),
        }
        rows.push(row);
    }
    let slopes = summarize(&mut rows);
    if let Some(dir) = &ladder.base.output.dir {
        let dir = if dir.is_absolute() {
            dir.clone()
        } else {
            base.join(dir)
        };
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(io_err(&p))
        };
        write("convergence.csv", rows_csv(&rows))?;
        write("slopes.csv", slopes_csv(&slopes))?;
        let failures: Vec<String> = rows
            .iter()
            .filter_map(|r| {
                r.failure.as_ref().map(|f| {
                    format!(
                        "{} P{} {} N={}: {f}",
                        r.problem,
                        r.degree,
                        r.mesh_mode.as_str(),
                        r.n_elements
                    )
                })
            })
            .collect();
        if !failures.is_empty() {
            write("failures.txt", failures.join("\n") + "\n")?;
        }
    }
    Ok((rows, slopes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, l1: f64) -> LadderRow {
        LadderRow {
            problem: "p".into(),
            degree: 1,
            mesh_mode: MeshMode::Fixed,
            n_elements: n,
            dim: 1,
            norms: Some(Norms {
                l1,
                l2: l1,
                linf: l1,
            }),
            order_l1: None,
            order_l2: None,
            cpu_seconds: 0.0,
            failure: None,
        }
    }

    #[test]
    fn single_row_has_no_order() {
        let mut rows = vec![row(10, 1e-3)];
        let s = summarize(&mut rows);
        assert_eq!(rows[0].order_l1, None);
        assert_eq!(s[0].l1, None);
        let csv = rows_csv(&rows);
        assert!(csv.lines().nth(1).unwrap().contains(",n/a,n/a,"));
    }

    #[test]
    fn orders_and_failures() {
        let mut rows = vec![row(10, 1e-2), row(20, 2.5e-3), row(40, 6.25e-4)];
        rows[1].norms = None;
        rows[1].failure = Some("boom".into());
        let s = summarize(&mut rows);
        assert!((rows[2].order_l1.unwrap() - 2.0).abs() < 1e-12);
        assert!((s[0].l1.unwrap() - 2.0).abs() < 1e-12);
        assert!(rows_csv(&rows).contains("failed"));
    }

    #[test]
    fn ladder_keeps_going_after_failure() {
        let text = "[problem]\nname = \"ex1-1d\"\n[discretization]\nt_final = 0.002\n\
                    [ladder]\ndegrees = [1]\nelements = [0, 10, 20]\nmodes = [\"fixed\"]\n";
        let l: LadderConfig = toml::from_str(text).unwrap();
        let (rows, slopes) = converge(&l, Path::new(".")).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].failure.is_some());
        assert!(rows[1].norms.is_some() && rows[2].norms.is_some());
        assert!(slopes[0].l1.is_some());
    }
}
